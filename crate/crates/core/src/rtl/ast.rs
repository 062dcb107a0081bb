//! Elaborated representation of a single flat module.
//!
//! Every statement keeps its 1-based source line and byte span so that the
//! tracer can quote source lines and the mutators can patch the original text
//! in place. Spans are skipped in JSON dumps.

use serde::Serialize;

use super::lexer::Literal;
use super::source::Span;
use super::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Wire,
    Reg,
    /// SystemVerilog `logic`: drivable by either an `assign` or a process.
    Logic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub kind: NetKind,
    pub width: u32,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Net {
    pub name: String,
    pub kind: NetKind,
    pub width: u32,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: String,
    pub value: Word,
    pub local: bool,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContinuousAssign {
    pub lhs: LValue,
    pub rhs: Expr,
    pub line: usize,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    Combinational,
    Posedge { clock: String },
    PosedgeSyncReset { clock: String, reset: String },
}

impl Trigger {
    pub fn is_clocked(&self) -> bool {
        !matches!(self, Trigger::Combinational)
    }

    pub fn clock(&self) -> Option<&str> {
        match self {
            Trigger::Combinational => None,
            Trigger::Posedge { clock } | Trigger::PosedgeSyncReset { clock, .. } => Some(clock),
        }
    }

    pub fn reset(&self) -> Option<&str> {
        match self {
            Trigger::PosedgeSyncReset { reset, .. } => Some(reset),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Process {
    pub trigger: Trigger,
    pub body: Stmt,
    pub line: usize,
    pub end_line: usize,
    /// Lines of blocking assignments inside a clocked process.
    pub blocking_in_clocked: Vec<usize>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignKind {
    Blocking,
    NonBlocking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Case,
    Casez,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "stmt", rename_all = "snake_case")]
pub enum Stmt {
    Block {
        stmts: Vec<Stmt>,
        line: usize,
    },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
        line: usize,
        /// `if (...)` up to and including the closing parenthesis.
        #[serde(skip)]
        head: Span,
        #[serde(skip)]
        span: Span,
    },
    Case {
        kind: CaseKind,
        selector: Expr,
        arms: Vec<CaseArm>,
        default: Option<Box<Stmt>>,
        line: usize,
        #[serde(skip)]
        span: Span,
    },
    Assign {
        kind: AssignKind,
        lhs: LValue,
        rhs: Expr,
        line: usize,
        #[serde(skip)]
        span: Span,
        /// The `=` or `<=` token.
        #[serde(skip)]
        op_span: Span,
    },
    Null {
        line: usize,
    },
}

impl Stmt {
    pub fn line(&self) -> usize {
        match self {
            Stmt::Block { line, .. }
            | Stmt::If { line, .. }
            | Stmt::Case { line, .. }
            | Stmt::Assign { line, .. }
            | Stmt::Null { line } => *line,
        }
    }

    /// Pre-order walk over this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::Block { stmts, .. } => stmts.iter().for_each(|s| s.walk(f)),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.walk(f);
                if let Some(e) = else_branch {
                    e.walk(f);
                }
            }
            Stmt::Case { arms, default, .. } => {
                arms.iter().for_each(|a| a.body.walk(f));
                if let Some(d) = default {
                    d.walk(f);
                }
            }
            Stmt::Assign { .. } | Stmt::Null { .. } => {}
        }
    }

    /// Signals assigned anywhere inside this statement, in first-seen order.
    pub fn assigned_signals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk(&mut |s| {
            if let Stmt::Assign { lhs, .. } = s {
                for n in lhs.targets() {
                    if !out.iter().any(|o| o == n) {
                        out.push(n.to_string());
                    }
                }
            }
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseArm {
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "lvalue", rename_all = "snake_case")]
pub enum LValue {
    Whole { name: String },
    Bit { name: String, index: Expr },
    Part { name: String, msb: u32, lsb: u32 },
    Concat { parts: Vec<LValue> },
}

impl LValue {
    /// Every signal written by this target.
    pub fn targets(&self) -> Vec<&str> {
        match self {
            LValue::Whole { name } | LValue::Bit { name, .. } | LValue::Part { name, .. } => {
                vec![name.as_str()]
            }
            LValue::Concat { parts } => parts.iter().flat_map(|p| p.targets()).collect(),
        }
    }

    /// Signals read to locate the target (bit-select indices).
    pub fn index_reads(&self) -> Vec<&str> {
        match self {
            LValue::Bit { index, .. } => index.signals(),
            LValue::Concat { parts } => parts.iter().flat_map(|p| p.index_reads()).collect(),
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryOp {
    Not,
    LogicalNot,
    Neg,
    Plus,
    ReduceAnd,
    ReduceOr,
    ReduceXor,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "~",
            UnaryOp::LogicalNot => "!",
            UnaryOp::Neg => "-",
            UnaryOp::Plus => "+",
            UnaryOp::ReduceAnd => "&",
            UnaryOp::ReduceOr => "|",
            UnaryOp::ReduceXor => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    LogicalAnd,
    LogicalOr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
            BinaryOp::Xor => "^",
            BinaryOp::LogicalAnd => "&&",
            BinaryOp::LogicalOr => "||",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
        }
    }

    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expr {
    #[serde(flatten)]
    pub kind: ExprKind,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "expr", rename_all = "snake_case")]
pub enum ExprKind {
    Signal {
        name: String,
    },
    /// A reference to a `parameter`/`localparam`, already folded.
    Const {
        name: String,
        value: Word,
    },
    Literal {
        literal: Literal,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        #[serde(skip)]
        op_span: Span,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
    },
    Concat {
        items: Vec<Expr>,
    },
    Replicate {
        count: u32,
        items: Vec<Expr>,
    },
    Index {
        name: String,
        index: Box<Expr>,
    },
    Slice {
        name: String,
        msb: u32,
        lsb: u32,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Signals read by the expression, in first-seen order, deduplicated.
    pub fn signals(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.collect_signals(&mut out);
        out
    }

    fn collect_signals<'a>(&'a self, out: &mut Vec<&'a str>) {
        let push = |n: &'a str, out: &mut Vec<&'a str>| {
            if !out.contains(&n) {
                out.push(n);
            }
        };
        match &self.kind {
            ExprKind::Signal { name } | ExprKind::Slice { name, .. } => push(name, out),
            ExprKind::Index { name, index } => {
                push(name, out);
                index.collect_signals(out);
            }
            ExprKind::Const { .. } | ExprKind::Literal { .. } => {}
            ExprKind::Unary { operand, .. } => operand.collect_signals(out),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.collect_signals(out);
                rhs.collect_signals(out);
            }
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                cond.collect_signals(out);
                then_expr.collect_signals(out);
                else_expr.collect_signals(out);
            }
            ExprKind::Concat { items } | ExprKind::Replicate { items, .. } => {
                items.iter().for_each(|i| i.collect_signals(out))
            }
        }
    }

    /// Pre-order walk over sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Index { index, .. } => index.walk(f),
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                cond.walk(f);
                then_expr.walk(f);
                else_expr.walk(f);
            }
            ExprKind::Concat { items } | ExprKind::Replicate { items, .. } => {
                items.iter().for_each(|i| i.walk(f))
            }
            _ => {}
        }
    }

    /// The constant value when the expression is a literal or parameter.
    pub fn constant(&self) -> Option<Word> {
        match &self.kind {
            ExprKind::Literal { literal } if literal.fill.is_none() => {
                Some(literal.to_word(literal.width()))
            }
            ExprKind::Const { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Width and role of a declared signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalInfo {
    pub width: u32,
    pub kind: NetKind,
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RtlModule {
    pub name: String,
    pub ports: Vec<Port>,
    pub nets: Vec<Net>,
    pub params: Vec<Param>,
    pub assigns: Vec<ContinuousAssign>,
    pub processes: Vec<Process>,
}

impl RtlModule {
    pub fn signal(&self, name: &str) -> Option<SignalInfo> {
        if let Some(p) = self.ports.iter().find(|p| p.name == name) {
            return Some(SignalInfo {
                width: p.width,
                kind: p.kind,
                direction: Some(p.direction),
            });
        }
        self.nets
            .iter()
            .find(|n| n.name == name)
            .map(|n| SignalInfo {
                width: n.width,
                kind: n.kind,
                direction: None,
            })
    }

    /// All signal names: ports in declaration order, then internal nets.
    pub fn signal_names(&self) -> Vec<&str> {
        self.ports
            .iter()
            .map(|p| p.name.as_str())
            .chain(self.nets.iter().map(|n| n.name.as_str()))
            .collect()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Port> {
        self.ports
            .iter()
            .filter(|p| p.direction == Direction::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Port> {
        self.ports
            .iter()
            .filter(|p| p.direction != Direction::Input)
    }

    /// Signals used as a clock by some process.
    pub fn clocks(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in &self.processes {
            if let Some(c) = p.trigger.clock() {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Input ports other than clocks: the values a stimulus must drive.
    pub fn data_inputs(&self) -> Vec<&Port> {
        let clocks = self.clocks();
        self.inputs()
            .filter(|p| !clocks.contains(&p.name.as_str()))
            .collect()
    }

    /// Clocks of the processes, or for a port-only header the 1-bit inputs
    /// named like a clock.
    pub fn clock_ports(&self) -> Vec<&str> {
        let c = self.clocks();
        if !c.is_empty() || !self.processes.is_empty() {
            return c;
        }
        self.inputs()
            .filter(|p| p.width == 1 && is_clock_name(&p.name))
            .map(|p| p.name.as_str())
            .collect()
    }

    /// Inputs a stimulus drives: everything but [`RtlModule::clock_ports`].
    pub fn stimulus_inputs(&self) -> Vec<&Port> {
        let clocks = self.clock_ports();
        self.inputs()
            .filter(|p| !clocks.contains(&p.name.as_str()))
            .collect()
    }

    /// The first 1-bit input named like an active-high reset.
    pub fn reset_port(&self) -> Option<&str> {
        self.inputs()
            .find(|p| p.width == 1 && is_reset_name(&p.name))
            .map(|p| p.name.as_str())
    }

    /// Registers written by clocked processes, in declaration order.
    pub fn state_registers(&self) -> Vec<&str> {
        let mut written: Vec<String> = Vec::new();
        for p in self.processes.iter().filter(|p| p.trigger.is_clocked()) {
            written.extend(p.body.assigned_signals());
        }
        self.signal_names()
            .into_iter()
            .filter(|n| written.iter().any(|w| w == n))
            .collect()
    }

    /// Self-determined width of an expression. Undeclared names count as
    /// one bit; sums saturate so oversized expressions can be rejected.
    pub fn expr_width(&self, e: &Expr) -> u32 {
        let sig = |n: &str| self.signal(n).map(|s| s.width).unwrap_or(1);
        match &e.kind {
            ExprKind::Signal { name } => sig(name),
            ExprKind::Const { value, .. } => value.width(),
            ExprKind::Literal { literal } => literal.width(),
            ExprKind::Unary { op, operand } => match op {
                UnaryOp::Not | UnaryOp::Neg | UnaryOp::Plus => self.expr_width(operand),
                _ => 1,
            },
            ExprKind::Binary { op, lhs, rhs, .. } => match op {
                BinaryOp::Shl | BinaryOp::Shr => self.expr_width(lhs),
                op if op.is_relational() => 1,
                BinaryOp::LogicalAnd | BinaryOp::LogicalOr => 1,
                _ => self.expr_width(lhs).max(self.expr_width(rhs)),
            },
            ExprKind::Ternary {
                then_expr,
                else_expr,
                ..
            } => self.expr_width(then_expr).max(self.expr_width(else_expr)),
            ExprKind::Concat { items } => items
                .iter()
                .fold(0u32, |acc, i| acc.saturating_add(self.expr_width(i))),
            ExprKind::Replicate { count, items } => items
                .iter()
                .fold(0u32, |acc, i| acc.saturating_add(self.expr_width(i)))
                .saturating_mul(*count),
            ExprKind::Index { .. } => 1,
            ExprKind::Slice { msb, lsb, .. } => msb - lsb + 1,
        }
    }

    pub fn lvalue_width(&self, lv: &LValue) -> u32 {
        match lv {
            LValue::Whole { name } => self.signal(name).map(|s| s.width).unwrap_or(1),
            LValue::Bit { .. } => 1,
            LValue::Part { msb, lsb, .. } => msb - lsb + 1,
            LValue::Concat { parts } => parts
                .iter()
                .fold(0u32, |acc, p| acc.saturating_add(self.lvalue_width(p))),
        }
    }

    /// Ports with direction, kind and width, ignoring lines; used to compare
    /// interfaces across candidates.
    pub fn port_signature(&self) -> Vec<(String, Direction, u32)> {
        self.ports
            .iter()
            .map(|p| (p.name.clone(), p.direction, p.width))
            .collect()
    }
}

/// `rst`, `reset`, `sys_rst`, ... Active-low names (`rst_n`, `resetn`) are
/// not resets in this sense.
pub fn is_reset_name(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    (n.contains("rst") || n.contains("reset"))
        && !n.ends_with("_n")
        && !n.ends_with("rstn")
        && !n.ends_with("resetn")
}

pub fn is_clock_name(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n == "clk" || n == "clock" || n.ends_with("_clk") || n.starts_with("clk_")
}
