//! Recursive-descent parser and elaborator for the structural subset.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::error::ParseError;
use super::lexer::{tokenize, Literal, Token, TokenKind};
use super::source::{SourceUnit, Span};
use super::word::{Word, MAX_WIDTH};

/// Keywords that name constructs outside the subset.
const UNSUPPORTED_KEYWORDS: &[(&str, &str)] = &[
    ("initial", "initial block"),
    ("generate", "generate block"),
    ("genvar", "genvar"),
    ("function", "function"),
    ("task", "task"),
    ("integer", "integer variable"),
    ("real", "real variable"),
    ("time", "time variable"),
    ("fork", "fork/join"),
    ("join", "fork/join"),
    ("for", "for loop"),
    ("while", "while loop"),
    ("repeat", "repeat loop"),
    ("forever", "forever loop"),
    ("wait", "wait statement"),
    ("disable", "disable statement"),
    ("defparam", "defparam"),
    ("specify", "specify block"),
    ("supply0", "supply net"),
    ("supply1", "supply net"),
    ("tri", "tri net"),
    ("signed", "signed arithmetic"),
    ("casex", "casex"),
    ("negedge", "negedge trigger"),
    ("typedef", "typedef"),
    ("enum", "enum"),
    ("struct", "struct"),
    ("import", "package import"),
    ("package", "package"),
    ("interface", "interface"),
    ("always_latch", "always_latch"),
    ("deassign", "procedural continuous assignment"),
    ("force", "force"),
    ("release", "release"),
];

const RESERVED: &[&str] = &[
    "module",
    "endmodule",
    "input",
    "output",
    "inout",
    "wire",
    "reg",
    "logic",
    "assign",
    "always",
    "always_comb",
    "always_ff",
    "begin",
    "end",
    "if",
    "else",
    "case",
    "casez",
    "endcase",
    "default",
    "posedge",
    "or",
    "parameter",
    "localparam",
];

pub fn parse_module(src: &SourceUnit) -> Result<RtlModule, ParseError> {
    if src.text().trim().is_empty() {
        return Err(ParseError::Syntax {
            line: 1,
            expected: "`module`".into(),
        });
    }
    let tokens = tokenize(src.text())?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        params: HashMap::new(),
    };
    let module = p.module()?;
    if !p.at_eof() {
        let t = p.peek();
        return Err(if p.is_kw("module") {
            ParseError::Unsupported {
                line: t.line,
                construct: "multiple modules".into(),
            }
        } else {
            ParseError::Syntax {
                line: t.line,
                expected: "end of file after `endmodule`".into(),
            }
        });
    }
    elaborate(module)
}

/// Convenience wrapper over a raw string.
pub fn parse_str(text: &str) -> Result<RtlModule, ParseError> {
    parse_module(&SourceUnit::new("<string>", text))
}

/// Pending port while the module header and body are being read.
struct PortDecl {
    name: String,
    line: usize,
    direction: Option<Direction>,
    kind: NetKind,
    kind_declared: bool,
    width: u32,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    params: HashMap<String, Word>,
}

struct Body {
    name: String,
    ports: Vec<PortDecl>,
    nets: Vec<Net>,
    params: Vec<Param>,
    assigns: Vec<ContinuousAssign>,
    processes: Vec<Process>,
}

impl Parser {
    // ---- token helpers ----

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn prev_end(&self) -> usize {
        self.toks[self.pos.saturating_sub(1)].span.end
    }

    fn prev_line(&self) -> usize {
        self.toks[self.pos.saturating_sub(1)].line
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Eof)
    }

    fn line(&self) -> usize {
        self.peek().line
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek().kind, TokenKind::Sym(x) if x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn syntax<T>(&self, expected: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            line: self.line(),
            expected: expected.into(),
        })
    }

    fn expect_sym(&mut self, s: &str) -> Result<Token, ParseError> {
        if self.is_sym(s) {
            Ok(self.bump())
        } else {
            self.check_unsupported_here()?;
            self.syntax(format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<Token, ParseError> {
        if self.is_kw(s) {
            Ok(self.bump())
        } else {
            self.check_unsupported_here()?;
            self.syntax(format!("`{s}`"))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, usize), ParseError> {
        self.check_unsupported_here()?;
        match &self.peek().kind {
            TokenKind::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let name = name.clone();
                let line = self.bump().line;
                Ok((name, line))
            }
            _ => self.syntax("an identifier"),
        }
    }

    /// Reports the current token as unsupported if it names an excluded
    /// construct.
    fn check_unsupported_here(&self) -> Result<(), ParseError> {
        let t = self.peek();
        let construct = match &t.kind {
            TokenKind::Ident(name) => UNSUPPORTED_KEYWORDS
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, c)| c.to_string()),
            TokenKind::SystemName(name) => Some(format!("system task {name}")),
            TokenKind::Sym("#") => Some("delay or parameter override".into()),
            TokenKind::Sym("===") | TokenKind::Sym("!==") => Some("case equality".into()),
            TokenKind::Sym("<<<") | TokenKind::Sym(">>>") => Some("arithmetic shift".into()),
            TokenKind::Sym("/") | TokenKind::Sym("%") => Some("division".into()),
            TokenKind::Sym("~&")
            | TokenKind::Sym("~|")
            | TokenKind::Sym("~^")
            | TokenKind::Sym("^~") => Some("negated reduction".into()),
            TokenKind::Sym("+:") | TokenKind::Sym("-:") => Some("indexed part select".into()),
            _ => None,
        };
        match construct {
            Some(construct) => Err(ParseError::Unsupported {
                line: t.line,
                construct,
            }),
            None => Ok(()),
        }
    }

    // ---- module structure ----

    fn module(&mut self) -> Result<Body, ParseError> {
        self.check_unsupported_here()?;
        if self.is_kw("macromodule") {
            return Err(ParseError::Unsupported {
                line: self.line(),
                construct: "macromodule".into(),
            });
        }
        self.expect_kw("module")?;
        let (name, _) = self.expect_ident()?;
        let mut body = Body {
            name,
            ports: Vec::new(),
            nets: Vec::new(),
            params: Vec::new(),
            assigns: Vec::new(),
            processes: Vec::new(),
        };
        if self.eat_sym("#") {
            self.expect_sym("(")?;
            self.eat_kw("parameter");
            loop {
                self.param_assignment(&mut body, false)?;
                if !self.eat_sym(",") {
                    break;
                }
                self.eat_kw("parameter");
            }
            self.expect_sym(")")?;
        }
        if self.eat_sym("(") {
            if !self.is_sym(")") {
                self.port_list(&mut body)?;
            }
            self.expect_sym(")")?;
        }
        self.expect_sym(";")?;
        while !self.is_kw("endmodule") {
            if self.at_eof() {
                return self.syntax("`endmodule`");
            }
            self.item(&mut body)?;
        }
        self.bump();
        Ok(body)
    }

    fn port_list(&mut self, body: &mut Body) -> Result<(), ParseError> {
        let ansi = matches!(&self.peek().kind, TokenKind::Ident(k) if k == "input" || k == "output" || k == "inout");
        if !ansi {
            loop {
                let (name, line) = self.expect_ident()?;
                if body.ports.iter().any(|p| p.name == name) {
                    return Err(ParseError::Duplicate { line, name });
                }
                body.ports.push(PortDecl {
                    name,
                    line,
                    direction: None,
                    kind: NetKind::Wire,
                    kind_declared: false,
                    width: 1,
                });
                if !self.eat_sym(",") {
                    return Ok(());
                }
            }
        }
        let mut direction = Direction::Input;
        let mut kind = NetKind::Wire;
        let mut width = 1;
        loop {
            if let Some(d) = self.direction() {
                direction = d;
                kind = self.net_kind().unwrap_or(NetKind::Wire);
                width = self.opt_range()?;
            }
            let (name, line) = self.expect_ident()?;
            if body.ports.iter().any(|p| p.name == name) {
                return Err(ParseError::Duplicate { line, name });
            }
            body.ports.push(PortDecl {
                name,
                line,
                direction: Some(direction),
                kind,
                kind_declared: true,
                width,
            });
            if !self.eat_sym(",") {
                return Ok(());
            }
        }
    }

    fn direction(&mut self) -> Option<Direction> {
        let d = match &self.peek().kind {
            TokenKind::Ident(k) if k == "input" => Direction::Input,
            TokenKind::Ident(k) if k == "output" => Direction::Output,
            TokenKind::Ident(k) if k == "inout" => Direction::Inout,
            _ => return None,
        };
        self.bump();
        Some(d)
    }

    fn net_kind(&mut self) -> Option<NetKind> {
        let k = match &self.peek().kind {
            TokenKind::Ident(k) if k == "wire" => NetKind::Wire,
            TokenKind::Ident(k) if k == "reg" => NetKind::Reg,
            TokenKind::Ident(k) if k == "logic" => NetKind::Logic,
            _ => return None,
        };
        self.bump();
        Some(k)
    }

    /// `[msb:0]` → width; absent → 1.
    fn opt_range(&mut self) -> Result<u32, ParseError> {
        self.check_unsupported_here()?;
        if !self.is_sym("[") {
            return Ok(1);
        }
        let line = self.bump().line;
        let msb = self.const_expr()?;
        self.expect_sym(":")?;
        let lsb = self.const_expr()?;
        self.expect_sym("]")?;
        if lsb != 0 {
            return Err(ParseError::Unsupported {
                line,
                construct: format!("vector range [{msb}:{lsb}] with nonzero lsb"),
            });
        }
        if msb >= MAX_WIDTH as u128 {
            return Err(ParseError::Unsupported {
                line,
                construct: format!("vector wider than {MAX_WIDTH} bits"),
            });
        }
        Ok(msb as u32 + 1)
    }

    fn const_expr(&mut self) -> Result<u128, ParseError> {
        let line = self.line();
        let e = self.expr()?;
        const_eval(&e).ok_or(ParseError::Syntax {
            line,
            expected: "a constant expression".into(),
        })
    }

    fn item(&mut self, body: &mut Body) -> Result<(), ParseError> {
        self.check_unsupported_here()?;
        let t = self.peek().clone();
        let kw = match &t.kind {
            TokenKind::Ident(k) => k.clone(),
            _ => return self.syntax("a module item"),
        };
        match kw.as_str() {
            "input" | "output" | "inout" => self.port_decl(body),
            "wire" | "reg" | "logic" => self.net_decl(body),
            "parameter" | "localparam" => {
                self.bump();
                let local = kw == "localparam";
                loop {
                    self.param_assignment(body, local)?;
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
                Ok(())
            }
            "assign" => {
                self.bump();
                loop {
                    let start = self.peek().span.start;
                    let line = self.line();
                    let lhs = self.lvalue()?;
                    self.expect_sym("=")?;
                    let rhs = self.expr()?;
                    body.assigns.push(ContinuousAssign {
                        lhs,
                        rhs,
                        line,
                        span: Span::new(start, self.prev_end()),
                    });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
                Ok(())
            }
            "always" | "always_comb" | "always_ff" => self.always(body),
            _ => {
                // `foo bar (...)` or `foo #(...)` is an instantiation.
                let next = &self.peek_at(1).kind;
                if matches!(next, TokenKind::Ident(_)) || matches!(next, TokenKind::Sym("#")) {
                    return Err(ParseError::Unsupported {
                        line: t.line,
                        construct: "module instantiation".into(),
                    });
                }
                self.syntax("a module item")
            }
        }
    }

    fn port_decl(&mut self, body: &mut Body) -> Result<(), ParseError> {
        let direction = self.direction().expect("caller checked");
        let kind = self.net_kind();
        let width = self.opt_range()?;
        loop {
            let (name, line) = self.expect_ident()?;
            let Some(p) = body.ports.iter_mut().find(|p| p.name == name) else {
                return Err(ParseError::Syntax {
                    line,
                    expected: format!("`{name}` in the module port list"),
                });
            };
            if p.direction.is_some() {
                return Err(ParseError::Duplicate { line, name });
            }
            p.direction = Some(direction);
            p.width = width;
            p.line = line;
            if let Some(k) = kind {
                p.kind = k;
                p.kind_declared = true;
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(())
    }

    fn net_decl(&mut self, body: &mut Body) -> Result<(), ParseError> {
        let kind = self.net_kind().expect("caller checked");
        let width = self.opt_range()?;
        loop {
            let (name, line) = self.expect_ident()?;
            if let Some(p) = body.ports.iter_mut().find(|p| p.name == name) {
                // `output q; reg q;` style: refines the port's kind.
                if p.kind_declared && p.direction.is_some() && p.kind != NetKind::Wire {
                    return Err(ParseError::Duplicate { line, name });
                }
                if p.kind_declared && kind == p.kind {
                    return Err(ParseError::Duplicate { line, name });
                }
                p.kind = kind;
                p.kind_declared = true;
                if width != 1 || p.width == 1 {
                    p.width = width;
                }
            } else {
                if body.nets.iter().any(|n| n.name == name) || self.params.contains_key(&name) {
                    return Err(ParseError::Duplicate { line, name });
                }
                body.nets.push(Net {
                    name: name.clone(),
                    kind,
                    width,
                    line,
                });
            }
            if self.is_sym("=") {
                if kind != NetKind::Wire {
                    return Err(ParseError::Unsupported {
                        line,
                        construct: "variable initializer".into(),
                    });
                }
                let start = self.toks[self.pos - 1].span.start;
                self.bump();
                let rhs = self.expr()?;
                body.assigns.push(ContinuousAssign {
                    lhs: LValue::Whole { name },
                    rhs,
                    line,
                    span: Span::new(start, self.prev_end()),
                });
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(())
    }

    fn param_assignment(&mut self, body: &mut Body, local: bool) -> Result<(), ParseError> {
        let ranged = self.is_sym("[");
        let width = self.opt_range()?;
        let (name, line) = self.expect_ident()?;
        if self.params.contains_key(&name) {
            return Err(ParseError::Duplicate { line, name });
        }
        self.expect_sym("=")?;
        let e = self.expr()?;
        let value = const_eval(&e).ok_or(ParseError::Syntax {
            line,
            expected: "a constant parameter value".into(),
        })?;
        let width = if ranged {
            width
        } else {
            match &e.kind {
                ExprKind::Literal { literal } if literal.size.is_some() => literal.width(),
                ExprKind::Const { value, .. } => value.width(),
                _ => 32,
            }
        };
        let w = Word::new(width, value);
        self.params.insert(name.clone(), w);
        body.params.push(Param {
            name,
            value: w,
            local,
            line,
        });
        Ok(())
    }

    fn always(&mut self, body: &mut Body) -> Result<(), ParseError> {
        let head = self.bump();
        let kw = match &head.kind {
            TokenKind::Ident(k) => k.clone(),
            _ => unreachable!(),
        };
        let trigger = if kw == "always_comb" {
            Trigger::Combinational
        } else {
            if !self.is_sym("@") {
                self.check_unsupported_here()?;
                return Err(ParseError::Unsupported {
                    line: head.line,
                    construct: "always without event control".into(),
                });
            }
            self.bump();
            let t = self.event_control()?;
            if kw == "always_ff" && !t.is_clocked() {
                return Err(ParseError::Syntax {
                    line: head.line,
                    expected: "`posedge` event for always_ff".into(),
                });
            }
            t
        };
        let stmt = self.stmt()?;
        body.processes.push(Process {
            trigger,
            body: stmt,
            line: head.line,
            end_line: self.prev_line(),
            blocking_in_clocked: Vec::new(),
            span: Span::new(head.span.start, self.prev_end()),
        });
        Ok(())
    }

    fn event_control(&mut self) -> Result<Trigger, ParseError> {
        if self.eat_sym("*") {
            return Ok(Trigger::Combinational);
        }
        self.expect_sym("(")?;
        if self.eat_sym("*") {
            self.expect_sym(")")?;
            return Ok(Trigger::Combinational);
        }
        if self.eat_kw("posedge") {
            let (clock, _) = self.expect_ident()?;
            if self.is_kw("or") || self.is_sym(",") {
                return Err(ParseError::Unsupported {
                    line: self.line(),
                    construct: "asynchronous reset or multiple clock edges".into(),
                });
            }
            self.expect_sym(")")?;
            return Ok(Trigger::Posedge { clock });
        }
        // Explicit sensitivity list: treated as combinational.
        loop {
            self.expect_ident()?;
            if !(self.eat_kw("or") || self.eat_sym(",")) {
                break;
            }
            if self.is_kw("posedge") {
                return Err(ParseError::Unsupported {
                    line: self.line(),
                    construct: "mixed edge and level sensitivity".into(),
                });
            }
        }
        self.expect_sym(")")?;
        Ok(Trigger::Combinational)
    }

    // ---- statements ----

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        self.check_unsupported_here()?;
        let t = self.peek().clone();
        let line = t.line;
        if self.eat_sym(";") {
            return Ok(Stmt::Null { line });
        }
        if self.eat_kw("begin") {
            if self.eat_sym(":") {
                self.expect_ident()?;
            }
            let mut stmts = Vec::new();
            while !self.is_kw("end") {
                if self.at_eof() {
                    return self.syntax("`end`");
                }
                stmts.push(self.stmt()?);
            }
            self.bump();
            if self.eat_sym(":") {
                self.expect_ident()?;
            }
            return Ok(Stmt::Block { stmts, line });
        }
        if self.eat_kw("if") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let head = Span::new(t.span.start, self.prev_end());
            let then_branch = Box::new(self.stmt()?);
            let else_branch = if self.eat_kw("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt::If {
                cond,
                then_branch,
                else_branch,
                line,
                head,
                span: Span::new(t.span.start, self.prev_end()),
            });
        }
        if self.is_kw("case") || self.is_kw("casez") {
            let kind = if self.is_kw("case") {
                CaseKind::Case
            } else {
                CaseKind::Casez
            };
            self.bump();
            self.expect_sym("(")?;
            let selector = self.expr()?;
            self.expect_sym(")")?;
            let mut arms = Vec::new();
            let mut default = None;
            while !self.is_kw("endcase") {
                if self.at_eof() {
                    return self.syntax("`endcase`");
                }
                let arm_line = self.line();
                if self.eat_kw("default") {
                    self.eat_sym(":");
                    if default.is_some() {
                        return Err(ParseError::Duplicate {
                            line: arm_line,
                            name: "default".into(),
                        });
                    }
                    default = Some(Box::new(self.stmt()?));
                    continue;
                }
                let mut labels = vec![self.expr()?];
                while self.eat_sym(",") {
                    labels.push(self.expr()?);
                }
                self.expect_sym(":")?;
                let body = self.stmt()?;
                arms.push(CaseArm {
                    labels,
                    body,
                    line: arm_line,
                });
            }
            self.bump();
            return Ok(Stmt::Case {
                kind,
                selector,
                arms,
                default,
                line,
                span: Span::new(t.span.start, self.prev_end()),
            });
        }
        if self.is_kw("assign") {
            return Err(ParseError::Unsupported {
                line,
                construct: "procedural continuous assignment".into(),
            });
        }
        let lhs = self.lvalue()?;
        let kind = if self.is_sym("=") {
            AssignKind::Blocking
        } else if self.is_sym("<=") {
            AssignKind::NonBlocking
        } else {
            self.check_unsupported_here()?;
            return self.syntax("`=` or `<=`");
        };
        let op_span = self.bump().span;
        if self.is_sym("#") {
            return Err(ParseError::Unsupported {
                line: self.line(),
                construct: "intra-assignment delay".into(),
            });
        }
        let rhs = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt::Assign {
            kind,
            lhs,
            rhs,
            line,
            span: Span::new(t.span.start, self.prev_end()),
            op_span,
        })
    }

    fn lvalue(&mut self) -> Result<LValue, ParseError> {
        self.check_unsupported_here()?;
        if self.eat_sym("{") {
            let mut parts = vec![self.lvalue()?];
            while self.eat_sym(",") {
                parts.push(self.lvalue()?);
            }
            self.expect_sym("}")?;
            return Ok(LValue::Concat { parts });
        }
        let (name, _) = self.expect_ident()?;
        if self.eat_sym("[") {
            let index = self.expr()?;
            if self.eat_sym(":") {
                let line = self.line();
                let msb = const_eval(&index);
                let lsb = self.const_expr()?;
                self.expect_sym("]")?;
                let msb = msb.ok_or(ParseError::Syntax {
                    line,
                    expected: "a constant part-select bound".into(),
                })?;
                return part_select(line, name, msb, lsb).map(|(name, msb, lsb)| LValue::Part {
                    name,
                    msb,
                    lsb,
                });
            }
            self.check_unsupported_here()?;
            self.expect_sym("]")?;
            return Ok(LValue::Bit { name, index });
        }
        Ok(LValue::Whole { name })
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let cond = self.binary(0)?;
        if self.eat_sym("?") {
            let then_expr = self.expr()?;
            self.expect_sym(":")?;
            let else_expr = self.expr()?;
            let span = cond.span.to(else_expr.span);
            return Ok(Expr::new(
                ExprKind::Ternary {
                    cond: Box::new(cond),
                    then_expr: Box::new(then_expr),
                    else_expr: Box::new(else_expr),
                },
                span,
            ));
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ParseError> {
        const LEVELS: &[&[(&str, BinaryOp)]] = &[
            &[("||", BinaryOp::LogicalOr)],
            &[("&&", BinaryOp::LogicalAnd)],
            &[("|", BinaryOp::Or)],
            &[("^", BinaryOp::Xor)],
            &[("&", BinaryOp::And)],
            &[("==", BinaryOp::Eq), ("!=", BinaryOp::Ne)],
            &[
                ("<", BinaryOp::Lt),
                ("<=", BinaryOp::Le),
                (">", BinaryOp::Gt),
                (">=", BinaryOp::Ge),
            ],
            &[("<<", BinaryOp::Shl), (">>", BinaryOp::Shr)],
            &[("+", BinaryOp::Add), ("-", BinaryOp::Sub)],
            &[("*", BinaryOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            self.check_unsupported_here()?;
            let op = LEVELS[level]
                .iter()
                .find(|(s, _)| self.is_sym(s))
                .map(|(_, op)| *op);
            let Some(op) = op else { return Ok(lhs) };
            let op_span = self.bump().span;
            let rhs = self.binary(level + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                    op_span,
                },
                span,
            );
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.check_unsupported_here()?;
        let ops = [
            ("~", UnaryOp::Not),
            ("!", UnaryOp::LogicalNot),
            ("-", UnaryOp::Neg),
            ("+", UnaryOp::Plus),
            ("&", UnaryOp::ReduceAnd),
            ("|", UnaryOp::ReduceOr),
            ("^", UnaryOp::ReduceXor),
        ];
        if let Some((_, op)) = ops.iter().find(|(s, _)| self.is_sym(s)) {
            let op = *op;
            let start = self.bump().span;
            let operand = self.unary()?;
            let span = start.to(operand.span);
            return Ok(Expr::new(
                ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                span,
            ));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.check_unsupported_here()?;
        let t = self.peek().clone();
        match &t.kind {
            TokenKind::Number(lit) => {
                self.bump();
                Ok(Expr::new(
                    ExprKind::Literal {
                        literal: lit.clone(),
                    },
                    t.span,
                ))
            }
            TokenKind::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            TokenKind::Sym("{") => {
                self.bump();
                let first = self.expr()?;
                if self.is_sym("{") {
                    let count = const_eval(&first).ok_or(ParseError::Syntax {
                        line: t.line,
                        expected: "a constant replication count".into(),
                    })?;
                    if count == 0 || count > MAX_WIDTH as u128 {
                        return Err(ParseError::Unsupported {
                            line: t.line,
                            construct: format!("replication count {count}"),
                        });
                    }
                    self.bump();
                    let mut items = vec![self.expr()?];
                    while self.eat_sym(",") {
                        items.push(self.expr()?);
                    }
                    self.expect_sym("}")?;
                    self.expect_sym("}")?;
                    return Ok(Expr::new(
                        ExprKind::Replicate {
                            count: count as u32,
                            items,
                        },
                        Span::new(t.span.start, self.prev_end()),
                    ));
                }
                let mut items = vec![first];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym("}")?;
                Ok(Expr::new(
                    ExprKind::Concat { items },
                    Span::new(t.span.start, self.prev_end()),
                ))
            }
            TokenKind::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                let name = name.clone();
                self.bump();
                if self.is_sym("(") {
                    return Err(ParseError::Unsupported {
                        line: t.line,
                        construct: format!("function call `{name}`"),
                    });
                }
                if let Some(value) = self.params.get(&name).copied() {
                    if self.is_sym("[") {
                        return Err(ParseError::Unsupported {
                            line: t.line,
                            construct: "select on a parameter".into(),
                        });
                    }
                    return Ok(Expr::new(ExprKind::Const { name, value }, t.span));
                }
                if self.eat_sym("[") {
                    let index = self.expr()?;
                    if self.eat_sym(":") {
                        let line = self.line();
                        let lsb = self.const_expr()?;
                        self.expect_sym("]")?;
                        let msb = const_eval(&index).ok_or(ParseError::Syntax {
                            line,
                            expected: "a constant part-select bound".into(),
                        })?;
                        let (name, msb, lsb) = part_select(line, name, msb, lsb)?;
                        return Ok(Expr::new(
                            ExprKind::Slice { name, msb, lsb },
                            Span::new(t.span.start, self.prev_end()),
                        ));
                    }
                    self.check_unsupported_here()?;
                    self.expect_sym("]")?;
                    return Ok(Expr::new(
                        ExprKind::Index {
                            name,
                            index: Box::new(index),
                        },
                        Span::new(t.span.start, self.prev_end()),
                    ));
                }
                Ok(Expr::new(ExprKind::Signal { name }, t.span))
            }
            _ => self.syntax("an expression"),
        }
    }
}

fn part_select(
    line: usize,
    name: String,
    msb: u128,
    lsb: u128,
) -> Result<(String, u32, u32), ParseError> {
    if msb < lsb || msb >= MAX_WIDTH as u128 {
        return Err(ParseError::Unsupported {
            line,
            construct: format!("part select [{msb}:{lsb}]"),
        });
    }
    Ok((name, msb as u32, lsb as u32))
}

/// Folds integer constant expressions made of literals and parameters.
pub fn const_eval(e: &Expr) -> Option<u128> {
    match &e.kind {
        ExprKind::Literal { literal } => defined_literal(literal),
        ExprKind::Const { value, .. } => value.value(),
        ExprKind::Unary { op, operand } => {
            let v = const_eval(operand)?;
            match op {
                UnaryOp::Plus => Some(v),
                UnaryOp::LogicalNot => Some((v == 0) as u128),
                _ => None,
            }
        }
        ExprKind::Binary { op, lhs, rhs, .. } => {
            let (a, b) = (const_eval(lhs)?, const_eval(rhs)?);
            match op {
                BinaryOp::Add => a.checked_add(b),
                BinaryOp::Sub => a.checked_sub(b),
                BinaryOp::Mul => a.checked_mul(b),
                BinaryOp::Shl => a.checked_shl(u32::try_from(b).ok()?),
                BinaryOp::Shr => a.checked_shr(u32::try_from(b).ok()?),
                BinaryOp::And => Some(a & b),
                BinaryOp::Or => Some(a | b),
                BinaryOp::Xor => Some(a ^ b),
                _ => None,
            }
        }
        _ => None,
    }
}

fn defined_literal(l: &Literal) -> Option<u128> {
    if l.fill.is_some() || l.unknown != 0 || l.wildcard != 0 {
        None
    } else {
        Some(l.value)
    }
}

/// Checks declarations, driver rules and assignment styles, and classifies
/// process triggers.
fn elaborate(body: Body) -> Result<RtlModule, ParseError> {
    let Body {
        name,
        ports,
        nets,
        params,
        assigns,
        mut processes,
    } = body;
    let mut out_ports = Vec::with_capacity(ports.len());
    for p in ports {
        let Some(direction) = p.direction else {
            return Err(ParseError::Syntax {
                line: p.line,
                expected: format!("a direction declaration for port `{}`", p.name),
            });
        };
        if direction == Direction::Input && p.kind == NetKind::Reg {
            return Err(ParseError::InvalidTarget {
                line: p.line,
                signal: p.name,
                why: "an input cannot be declared reg".into(),
            });
        }
        out_ports.push(Port {
            name: p.name,
            direction,
            kind: p.kind,
            width: p.width,
            line: p.line,
        });
    }
    for n in &nets {
        if params.iter().any(|p| p.name == n.name) {
            return Err(ParseError::Duplicate {
                line: n.line,
                name: n.name.clone(),
            });
        }
    }
    let mut m = RtlModule {
        name,
        ports: out_ports,
        nets,
        params,
        assigns,
        processes: Vec::new(),
    };

    // Declared-before-use is not required; every reference must resolve.
    let check_expr = |e: &Expr, line: usize, m: &RtlModule| -> Result<(), ParseError> {
        for name in e.signals() {
            if m.signal(name).is_none() {
                return Err(ParseError::Undeclared {
                    line,
                    name: name.to_string(),
                });
            }
        }
        let mut wide = false;
        e.walk(&mut |s| wide |= m.expr_width(s) > MAX_WIDTH);
        if wide {
            return Err(ParseError::Unsupported {
                line,
                construct: format!("expression wider than {MAX_WIDTH} bits"),
            });
        }
        Ok(())
    };

    // signal -> driver ids (assign index or process index)
    let mut drivers: BTreeMap<String, Vec<(bool, usize)>> = BTreeMap::new();
    for (i, a) in m.assigns.iter().enumerate() {
        check_expr(&a.rhs, a.line, &m)?;
        check_lvalue(&a.lhs, a.line, &m, false)?;
        for t in a.lhs.targets() {
            push_driver(&mut drivers, t, (false, i));
        }
    }
    for (i, p) in processes.iter_mut().enumerate() {
        let mut err = None;
        let mut blocking = Vec::new();
        let clocked = p.trigger.is_clocked();
        if let Some(c) = p.trigger.clock() {
            if m.signal(c).is_none() {
                return Err(ParseError::Undeclared {
                    line: p.line,
                    name: c.to_string(),
                });
            }
        }
        p.body.walk(&mut |s| {
            if err.is_some() {
                return;
            }
            let r = (|| -> Result<(), ParseError> {
                match s {
                    Stmt::If { cond, line, .. } => check_expr(cond, *line, &m),
                    Stmt::Case {
                        selector,
                        arms,
                        line,
                        ..
                    } => {
                        check_expr(selector, *line, &m)?;
                        for a in arms {
                            for l in &a.labels {
                                check_expr(l, a.line, &m)?;
                            }
                        }
                        Ok(())
                    }
                    Stmt::Assign {
                        kind,
                        lhs,
                        rhs,
                        line,
                        ..
                    } => {
                        check_expr(rhs, *line, &m)?;
                        check_lvalue(lhs, *line, &m, true)?;
                        match (clocked, kind) {
                            (false, AssignKind::NonBlocking) => Err(ParseError::Unsupported {
                                line: *line,
                                construct: "non-blocking assignment in combinational process"
                                    .into(),
                            }),
                            (true, AssignKind::Blocking) => {
                                blocking.push(*line);
                                Ok(())
                            }
                            _ => Ok(()),
                        }
                    }
                    _ => Ok(()),
                }
            })();
            if let Err(e) = r {
                err = Some(e);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        p.blocking_in_clocked = blocking;
        for t in p.body.assigned_signals() {
            push_driver(&mut drivers, &t, (true, i));
        }
        if let Trigger::Posedge { clock } = &p.trigger {
            if let Some(reset) = sync_reset(&p.body, &m) {
                p.trigger = Trigger::PosedgeSyncReset {
                    clock: clock.clone(),
                    reset,
                };
            }
        }
    }
    for (signal, ds) in &drivers {
        if ds.len() > 1 {
            return Err(ParseError::MultipleDrivers {
                signal: signal.clone(),
            });
        }
    }
    m.processes = processes;
    Ok(m)
}

fn push_driver(drivers: &mut BTreeMap<String, Vec<(bool, usize)>>, t: &str, id: (bool, usize)) {
    let e = drivers.entry(t.to_string()).or_default();
    if !e.contains(&id) {
        e.push(id);
    }
}

fn check_lvalue(
    lv: &LValue,
    line: usize,
    m: &RtlModule,
    procedural: bool,
) -> Result<(), ParseError> {
    for name in lv.index_reads() {
        if m.signal(name).is_none() {
            return Err(ParseError::Undeclared {
                line,
                name: name.to_string(),
            });
        }
    }
    if m.lvalue_width(lv) > MAX_WIDTH {
        return Err(ParseError::Unsupported {
            line,
            construct: format!("assignment target wider than {MAX_WIDTH} bits"),
        });
    }
    if let LValue::Concat { parts } = lv {
        for p in parts {
            check_lvalue(p, line, m, procedural)?;
        }
        return Ok(());
    }
    let name = lv.targets()[0];
    let invalid = |why: &str| ParseError::InvalidTarget {
        line,
        signal: name.to_string(),
        why: why.into(),
    };
    let Some(info) = m.signal(name) else {
        if m.params.iter().any(|p| p.name == name) {
            return Err(invalid("parameters are constant"));
        }
        return Err(ParseError::Undeclared {
            line,
            name: name.to_string(),
        });
    };
    if info.direction == Some(Direction::Input) {
        return Err(invalid("inputs are driven from outside the module"));
    }
    match (procedural, info.kind) {
        (true, NetKind::Wire) => return Err(invalid("a wire can only be driven by `assign`")),
        (false, NetKind::Reg) => return Err(invalid("a reg can only be written by a process")),
        _ => {}
    }
    if let LValue::Part { msb, .. } = lv {
        if *msb >= info.width {
            return Err(invalid("part select outside the declared range"));
        }
    }
    Ok(())
}

/// An outermost `if (rst)` on an input port whose name marks it as a reset.
fn sync_reset(body: &Stmt, m: &RtlModule) -> Option<String> {
    let mut s = body;
    while let Stmt::Block { stmts, .. } = s {
        if stmts.len() != 1 {
            return None;
        }
        s = &stmts[0];
    }
    let Stmt::If { cond, .. } = s else {
        return None;
    };
    let ExprKind::Signal { name } = &cond.kind else {
        return None;
    };
    let info = m.signal(name)?;
    (info.direction == Some(Direction::Input) && info.width == 1 && super::ast::is_reset_name(name))
        .then(|| name.clone())
}
