//! Cycle-accurate three-valued interpreter.
//!
//! One [`Simulator::step`] models a single rising clock edge: inputs are
//! applied, combinational logic settles, every clocked process runs against
//! the settled values, non-blocking updates commit together, and
//! combinational logic settles again.

use std::collections::{BTreeMap, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::ast::*;
use super::error::SimError;
use super::word::{Bit, Word};

/// Values of every declared signal at a cycle boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub cycle: usize,
    pub values: BTreeMap<String, Word>,
}

impl SimState {
    /// All signals unknown, cycle 0.
    pub fn initial(m: &RtlModule) -> SimState {
        let values = m
            .ports
            .iter()
            .map(|p| (p.name.clone(), Word::all_x(p.width)))
            .chain(
                m.nets
                    .iter()
                    .map(|n| (n.name.clone(), Word::all_x(n.width))),
            )
            .collect();
        SimState { cycle: 0, values }
    }
}

/// Observed signal values, one row per simulated cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub signals: Vec<String>,
    pub rows: Vec<Vec<Word>>,
}

#[derive(Serialize, Deserialize)]
struct TraceJson {
    signals: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s == name)
    }

    pub fn get(&self, cycle: usize, name: &str) -> Option<Word> {
        let c = self.column(name)?;
        self.rows.get(cycle).map(|r| r[c])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TraceJson {
            signals: self.signals.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(Word::to_bit_string).collect())
                .collect(),
        })
        .expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Trace, String> {
        let t: TraceJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut rows = Vec::with_capacity(t.rows.len());
        for r in t.rows {
            if r.len() != t.signals.len() {
                return Err("row length differs from signal count".into());
            }
            let row: Option<Vec<Word>> = r.iter().map(|b| Word::from_bit_string(b)).collect();
            rows.push(row.ok_or("malformed bit string")?);
        }
        Ok(Trace {
            signals: t.signals,
            rows,
        })
    }
}

impl Serialize for Trace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TraceJson {
            signals: self.signals.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(Word::to_bit_string).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Trace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Trace::from_json(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

// ---- compiled form ----

#[derive(Debug, Clone)]
enum CExpr {
    Sig(usize),
    Lit(Word),
    Fill(char),
    Unary(UnaryOp, Box<CExpr>, u32),
    Binary(BinaryOp, Box<CExpr>, Box<CExpr>, u32, u32),
    Ternary(Box<CExpr>, Box<CExpr>, Box<CExpr>, u32),
    Concat(Vec<(CExpr, u32)>),
    Replicate(u32, Vec<(CExpr, u32)>),
    Index(usize, Box<CExpr>, u32),
    Slice(usize, u32, u32),
}

#[derive(Debug, Clone)]
enum CLValue {
    Whole(usize),
    Bit(usize, CExpr, u32),
    Part(usize, u32, u32),
    Concat(Vec<(CLValue, u32)>),
}

#[derive(Debug, Clone)]
enum CStmt {
    Block(Vec<CStmt>),
    If(CExpr, u32, Box<CStmt>, Option<Box<CStmt>>),
    Case {
        selector: CExpr,
        width: u32,
        arms: Vec<(Vec<(CExpr, u128)>, CStmt)>,
        default: Option<Box<CStmt>>,
    },
    Assign {
        nonblocking: bool,
        lhs: CLValue,
        lhs_width: u32,
        rhs: CExpr,
        ctx: u32,
    },
    Null,
}

#[derive(Debug, Clone)]
enum CombNode {
    Assign {
        lhs: CLValue,
        lhs_width: u32,
        rhs: CExpr,
        ctx: u32,
    },
    Process(CStmt),
}

/// A module compiled to index-based form for repeated stepping.
#[derive(Debug, Clone)]
pub struct Simulator {
    names: Vec<String>,
    index: HashMap<String, usize>,
    widths: Vec<u32>,
    /// Data inputs (clocks excluded) in port order.
    data_inputs: Vec<usize>,
    clocks: Vec<usize>,
    inputs: Vec<usize>,
    comb: Vec<CombNode>,
    clocked: Vec<CStmt>,
    loop_error: Option<Vec<String>>,
    values: Vec<Word>,
    cycle: usize,
}

struct Env {
    values: Vec<Word>,
    pending: Vec<Option<Word>>,
}

impl Simulator {
    pub fn new(m: &RtlModule) -> Simulator {
        let names: Vec<String> = m.signal_names().into_iter().map(String::from).collect();
        let index: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let widths: Vec<u32> = names
            .iter()
            .map(|n| m.signal(n).expect("declared").width)
            .collect();
        let clock_names = m.clocks();
        let clocks = clock_names.iter().map(|c| index[*c]).collect();
        let data_inputs = m.data_inputs().iter().map(|p| index[&p.name]).collect();
        let inputs = m.inputs().map(|p| index[&p.name]).collect();
        let c = Compiler { m, index: &index };

        let mut comb = Vec::new();
        let mut comb_reads: Vec<Vec<usize>> = Vec::new();
        let mut comb_writes: Vec<Vec<usize>> = Vec::new();
        let mut self_loop = Vec::new();
        for a in &m.assigns {
            let lhs_width = m.lvalue_width(&a.lhs);
            let ctx = m.expr_width(&a.rhs).max(lhs_width);
            comb.push(CombNode::Assign {
                lhs: c.lvalue(&a.lhs),
                lhs_width,
                rhs: c.expr(&a.rhs),
                ctx,
            });
            let reads: Vec<usize> = a
                .rhs
                .signals()
                .into_iter()
                .chain(a.lhs.index_reads())
                .map(|n| index[n])
                .collect();
            let writes: Vec<usize> = a.lhs.targets().into_iter().map(|n| index[n]).collect();
            self_loop.push(reads.iter().any(|r| writes.contains(r)));
            comb_reads.push(reads);
            comb_writes.push(writes);
        }
        let mut clocked = Vec::new();
        for p in &m.processes {
            let body = c.stmt(&p.body);
            if p.trigger.is_clocked() {
                clocked.push(body);
            } else {
                comb.push(CombNode::Process(body));
                comb_reads.push(
                    stmt_reads(&p.body)
                        .iter()
                        .map(|n| index[n.as_str()])
                        .collect(),
                );
                comb_writes.push(
                    p.body
                        .assigned_signals()
                        .iter()
                        .map(|n| index[n.as_str()])
                        .collect(),
                );
                // A process reading a signal it also writes is treated as
                // sequential code within the block, not a loop.
                self_loop.push(false);
            }
        }

        // Order combinational nodes topologically; any strongly connected
        // component with more than one node, or an assign reading its own
        // target, is a loop.
        let mut g = DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..comb.len()).map(|i| g.add_node(i)).collect();
        for (i, w) in comb_writes.iter().enumerate() {
            for (j, r) in comb_reads.iter().enumerate() {
                if i != j && w.iter().any(|s| r.contains(s)) {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let mut loop_error = None;
        let sccs = tarjan_scc(&g);
        for scc in &sccs {
            let looped = scc.len() > 1 || self_loop[g[scc[0]]];
            if looped && loop_error.is_none() {
                let mut sigs: Vec<String> = scc
                    .iter()
                    .flat_map(|n| comb_writes[g[*n]].iter().map(|i| names[*i].clone()))
                    .collect();
                sigs.sort();
                sigs.dedup();
                loop_error = Some(sigs);
            }
        }
        // tarjan_scc yields components in reverse topological order.
        let order: Vec<usize> = sccs
            .iter()
            .rev()
            .flat_map(|s| s.iter().map(|n| g[*n]))
            .collect();
        let mut slots: Vec<Option<CombNode>> = comb.into_iter().map(Some).collect();
        let comb = order
            .into_iter()
            .map(|i| slots[i].take().expect("each node once"))
            .collect();

        let values = widths.iter().map(|w| Word::all_x(*w)).collect();
        Simulator {
            names,
            index,
            widths,
            data_inputs,
            clocks,
            inputs,
            comb,
            clocked,
            loop_error,
            values,
            cycle: 0,
        }
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    /// Names of the data inputs expected by [`Simulator::step_indexed`].
    pub fn data_input_names(&self) -> Vec<&str> {
        self.data_inputs
            .iter()
            .map(|i| self.names[*i].as_str())
            .collect()
    }

    pub fn data_input_widths(&self) -> Vec<u32> {
        self.data_inputs.iter().map(|i| self.widths[*i]).collect()
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn value(&self, name: &str) -> Option<Word> {
        self.signal_index(name).map(|i| self.values[i])
    }

    pub fn value_at(&self, index: usize) -> Word {
        self.values[index]
    }

    /// Raw snapshot of all signal values, for save/restore.
    pub fn snapshot(&self) -> (usize, Vec<Word>) {
        (self.cycle, self.values.clone())
    }

    pub fn restore(&mut self, snap: &(usize, Vec<Word>)) {
        self.cycle = snap.0;
        self.values.clone_from(&snap.1);
    }

    pub fn state(&self) -> SimState {
        SimState {
            cycle: self.cycle,
            values: self
                .names
                .iter()
                .cloned()
                .zip(self.values.iter().copied())
                .collect(),
        }
    }

    pub fn set_state(&mut self, st: &SimState) -> Result<(), SimError> {
        for (name, w) in &st.values {
            let i = self
                .signal_index(name)
                .ok_or_else(|| SimError::UnknownSignal(name.clone()))?;
            if w.width() != self.widths[i] {
                return Err(SimError::WidthMismatch {
                    name: name.clone(),
                    expected: self.widths[i],
                    got: w.width(),
                });
            }
            self.values[i] = *w;
        }
        self.cycle = st.cycle;
        Ok(())
    }

    /// Steps with named inputs. Every data input must be present; clocks may
    /// be omitted.
    pub fn step(&mut self, inputs: &BTreeMap<String, Word>) -> Result<(), SimError> {
        for (name, w) in inputs {
            let i = self
                .signal_index(name)
                .ok_or_else(|| SimError::NotAnInput(name.clone()))?;
            if !self.inputs.contains(&i) {
                return Err(SimError::NotAnInput(name.clone()));
            }
            if w.width() != self.widths[i] {
                return Err(SimError::WidthMismatch {
                    name: name.clone(),
                    expected: self.widths[i],
                    got: w.width(),
                });
            }
        }
        let mut ordered = Vec::with_capacity(self.data_inputs.len());
        for &i in &self.data_inputs {
            match inputs.get(&self.names[i]) {
                Some(w) => ordered.push(*w),
                None => return Err(SimError::MissingInput(self.names[i].clone())),
            }
        }
        self.step_indexed(&ordered)?;
        Ok(())
    }

    /// Steps with data inputs given in [`Simulator::data_input_names`] order.
    pub fn step_indexed(&mut self, inputs: &[Word]) -> Result<(), SimError> {
        if let Some(signals) = &self.loop_error {
            return Err(SimError::CombinationalLoop {
                signals: signals.clone(),
            });
        }
        assert_eq!(
            inputs.len(),
            self.data_inputs.len(),
            "one word per data input"
        );
        for (k, &i) in self.data_inputs.iter().enumerate() {
            self.values[i] = inputs[k].resize(self.widths[i]);
        }
        for &c in &self.clocks {
            self.values[c] = Word::ones(self.widths[c]);
        }
        self.settle();
        if !self.clocked.is_empty() {
            let mut env = Env {
                values: self.values.clone(),
                pending: vec![None; self.values.len()],
            };
            for p in &self.clocked {
                exec(p, &mut env);
            }
            for (i, p) in env.pending.into_iter().enumerate() {
                if let Some(w) = p {
                    env.values[i] = w;
                }
            }
            self.values = env.values;
            self.settle();
        }
        self.cycle += 1;
        Ok(())
    }

    fn settle(&mut self) {
        let mut env = Env {
            values: std::mem::take(&mut self.values),
            pending: Vec::new(),
        };
        for node in &self.comb {
            match node {
                CombNode::Assign {
                    lhs,
                    lhs_width,
                    rhs,
                    ctx,
                } => {
                    let v = eval(rhs, *ctx, &env.values).resize(*lhs_width);
                    write_lvalue(lhs, v, &mut env, false);
                }
                CombNode::Process(body) => exec(body, &mut env),
            }
        }
        self.values = env.values;
    }
}

struct Compiler<'a> {
    m: &'a RtlModule,
    index: &'a HashMap<String, usize>,
}

impl Compiler<'_> {
    fn w(&self, e: &Expr) -> u32 {
        self.m.expr_width(e)
    }

    fn expr(&self, e: &Expr) -> CExpr {
        match &e.kind {
            ExprKind::Signal { name } => CExpr::Sig(self.index[name]),
            ExprKind::Const { value, .. } => CExpr::Lit(*value),
            ExprKind::Literal { literal } => match literal.fill {
                Some(c) => CExpr::Fill(c),
                None => CExpr::Lit(literal.to_word(literal.width())),
            },
            ExprKind::Unary { op, operand } => {
                CExpr::Unary(*op, Box::new(self.expr(operand)), self.w(operand))
            }
            ExprKind::Binary { op, lhs, rhs, .. } => CExpr::Binary(
                *op,
                Box::new(self.expr(lhs)),
                Box::new(self.expr(rhs)),
                self.w(lhs),
                self.w(rhs),
            ),
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => CExpr::Ternary(
                Box::new(self.expr(cond)),
                Box::new(self.expr(then_expr)),
                Box::new(self.expr(else_expr)),
                self.w(cond),
            ),
            ExprKind::Concat { items } => {
                CExpr::Concat(items.iter().map(|i| (self.expr(i), self.w(i))).collect())
            }
            ExprKind::Replicate { count, items } => CExpr::Replicate(
                *count,
                items.iter().map(|i| (self.expr(i), self.w(i))).collect(),
            ),
            ExprKind::Index { name, index } => {
                CExpr::Index(self.index[name], Box::new(self.expr(index)), self.w(index))
            }
            ExprKind::Slice { name, msb, lsb } => CExpr::Slice(self.index[name], *msb, *lsb),
        }
    }

    fn lvalue(&self, lv: &LValue) -> CLValue {
        match lv {
            LValue::Whole { name } => CLValue::Whole(self.index[name]),
            LValue::Bit { name, index } => {
                CLValue::Bit(self.index[name], self.expr(index), self.w(index))
            }
            LValue::Part { name, msb, lsb } => CLValue::Part(self.index[name], *msb, *lsb),
            LValue::Concat { parts } => CLValue::Concat(
                parts
                    .iter()
                    .map(|p| (self.lvalue(p), self.m.lvalue_width(p)))
                    .collect(),
            ),
        }
    }

    fn stmt(&self, s: &Stmt) -> CStmt {
        match s {
            Stmt::Block { stmts, .. } => CStmt::Block(stmts.iter().map(|s| self.stmt(s)).collect()),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => CStmt::If(
                self.expr(cond),
                self.w(cond),
                Box::new(self.stmt(then_branch)),
                else_branch.as_ref().map(|e| Box::new(self.stmt(e))),
            ),
            Stmt::Case {
                kind,
                selector,
                arms,
                default,
                ..
            } => {
                let width = arms
                    .iter()
                    .flat_map(|a| a.labels.iter())
                    .map(|l| self.w(l))
                    .fold(self.w(selector), u32::max);
                let arms = arms
                    .iter()
                    .map(|a| {
                        let labels = a
                            .labels
                            .iter()
                            .map(|l| {
                                let wild = match (&l.kind, kind) {
                                    (ExprKind::Literal { literal }, CaseKind::Casez) => {
                                        literal.wildcard
                                    }
                                    _ => 0,
                                };
                                (self.expr(l), wild)
                            })
                            .collect();
                        (labels, self.stmt(&a.body))
                    })
                    .collect();
                CStmt::Case {
                    selector: self.expr(selector),
                    width,
                    arms,
                    default: default.as_ref().map(|d| Box::new(self.stmt(d))),
                }
            }
            Stmt::Assign { kind, lhs, rhs, .. } => {
                let lhs_width = self.m.lvalue_width(lhs);
                CStmt::Assign {
                    nonblocking: *kind == AssignKind::NonBlocking,
                    lhs: self.lvalue(lhs),
                    lhs_width,
                    rhs: self.expr(rhs),
                    ctx: self.w(rhs).max(lhs_width),
                }
            }
            Stmt::Null { .. } => CStmt::Null,
        }
    }
}

/// Signals read anywhere in a statement tree (conditions, selectors, labels,
/// right-hand sides, indices).
pub fn stmt_reads(s: &Stmt) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut add = |names: Vec<&str>| {
        for n in names {
            if !out.iter().any(|o| o == n) {
                out.push(n.to_string());
            }
        }
    };
    s.walk(&mut |s| match s {
        Stmt::If { cond, .. } => add(cond.signals()),
        Stmt::Case { selector, arms, .. } => {
            add(selector.signals());
            for a in arms {
                for l in &a.labels {
                    add(l.signals());
                }
            }
        }
        Stmt::Assign { lhs, rhs, .. } => {
            add(rhs.signals());
            add(lhs.index_reads());
        }
        _ => {}
    });
    out
}

fn eval(e: &CExpr, ctx: u32, v: &[Word]) -> Word {
    match e {
        CExpr::Sig(i) => v[*i].resize(ctx),
        CExpr::Lit(w) => w.resize(ctx),
        CExpr::Fill(c) => match c {
            '0' => Word::zero(ctx),
            '1' => Word::ones(ctx),
            _ => Word::all_x(ctx),
        },
        CExpr::Unary(op, a, aw) => match op {
            UnaryOp::Not => eval(a, ctx, v).not(),
            UnaryOp::Neg => eval(a, ctx, v).neg(),
            UnaryOp::Plus => eval(a, ctx, v),
            UnaryOp::LogicalNot => eval(a, *aw, v).logical_not().resize(ctx),
            UnaryOp::ReduceAnd => eval(a, *aw, v).reduce_and().resize(ctx),
            UnaryOp::ReduceOr => eval(a, *aw, v).reduce_or().resize(ctx),
            UnaryOp::ReduceXor => eval(a, *aw, v).reduce_xor().resize(ctx),
        },
        CExpr::Binary(op, a, b, aw, bw) => {
            use BinaryOp::*;
            match op {
                Add | Sub | Mul | And | Or | Xor => {
                    let (x, y) = (eval(a, ctx, v), eval(b, ctx, v));
                    match op {
                        Add => x.add(&y),
                        Sub => x.sub(&y),
                        Mul => x.mul(&y),
                        And => x.and(&y),
                        Or => x.or(&y),
                        _ => x.xor(&y),
                    }
                }
                Eq | Ne | Lt | Le | Gt | Ge => {
                    let w = (*aw).max(*bw);
                    let (x, y) = (eval(a, w, v), eval(b, w, v));
                    let r = match op {
                        Eq => x.eq_(&y),
                        Ne => x.ne_(&y),
                        Lt => x.lt(&y),
                        Le => x.le(&y),
                        Gt => x.gt(&y),
                        _ => x.ge(&y),
                    };
                    r.resize(ctx)
                }
                LogicalAnd => eval(a, *aw, v).logical_and(&eval(b, *bw, v)).resize(ctx),
                LogicalOr => eval(a, *aw, v).logical_or(&eval(b, *bw, v)).resize(ctx),
                Shl => eval(a, ctx, v).shl(&eval(b, *bw, v)),
                Shr => eval(a, ctx, v).shr(&eval(b, *bw, v)),
            }
        }
        CExpr::Ternary(c, t, f, cw) => match eval(c, *cw, v).truth() {
            Bit::One => eval(t, ctx, v),
            Bit::Zero => eval(f, ctx, v),
            Bit::X => eval(t, ctx, v).merge(&eval(f, ctx, v)),
        },
        CExpr::Concat(items) => concat(items, v).resize(ctx),
        CExpr::Replicate(n, items) => {
            let one = concat(items, v);
            let mut out = one;
            for _ in 1..*n {
                out = out.concat(&one);
            }
            out.resize(ctx)
        }
        CExpr::Index(i, idx, iw) => {
            let w = v[*i];
            let bit = match eval(idx, *iw, v).value() {
                Some(k) if k < w.width() as u128 => w.slice(k as u32, k as u32),
                _ => Word::all_x(1),
            };
            bit.resize(ctx)
        }
        CExpr::Slice(i, msb, lsb) => v[*i].slice(*msb, *lsb).resize(ctx),
    }
}

fn concat(items: &[(CExpr, u32)], v: &[Word]) -> Word {
    let mut it = items.iter();
    let (first, fw) = it.next().expect("nonempty concatenation");
    let mut out = eval(first, *fw, v);
    for (e, w) in it {
        out = out.concat(&eval(e, *w, v));
    }
    out
}

fn current(env: &Env, i: usize, nonblocking: bool) -> Word {
    if nonblocking {
        env.pending.get(i).and_then(|p| *p).unwrap_or(env.values[i])
    } else {
        env.values[i]
    }
}

fn put(env: &mut Env, i: usize, w: Word, nonblocking: bool) {
    if nonblocking {
        env.pending[i] = Some(w);
    } else {
        env.values[i] = w;
    }
}

fn write_lvalue(lv: &CLValue, val: Word, env: &mut Env, nb: bool) {
    match lv {
        CLValue::Whole(i) => {
            let w = env.values[*i].width();
            put(env, *i, val.resize(w), nb);
        }
        CLValue::Part(i, msb, lsb) => {
            let cur = current(env, *i, nb);
            put(env, *i, cur.with_slice(*msb, *lsb, &val), nb);
        }
        CLValue::Bit(i, idx, iw) => {
            let cur = current(env, *i, nb);
            let next = match eval(idx, *iw, &env.values).value() {
                Some(k) if k < cur.width() as u128 => cur.with_slice(k as u32, k as u32, &val),
                Some(_) => cur,
                // Unknown index: any bit may have been written.
                None => Word::all_x(cur.width()),
            };
            put(env, *i, next, nb);
        }
        CLValue::Concat(parts) => {
            let total: u32 = parts.iter().map(|(_, w)| *w).sum();
            let val = val.resize(total);
            let mut top = total;
            for (p, w) in parts {
                let piece = val.slice(top - 1, top - w);
                write_lvalue(p, piece, env, nb);
                top -= w;
            }
        }
    }
}

fn exec(s: &CStmt, env: &mut Env) {
    match s {
        CStmt::Null => {}
        CStmt::Block(stmts) => stmts.iter().for_each(|s| exec(s, env)),
        CStmt::Assign {
            nonblocking,
            lhs,
            lhs_width,
            rhs,
            ctx,
        } => {
            let v = eval(rhs, *ctx, &env.values).resize(*lhs_width);
            write_lvalue(lhs, v, env, *nonblocking);
        }
        CStmt::If(cond, cw, t, f) => match eval(cond, *cw, &env.values).truth() {
            Bit::One => exec(t, env),
            Bit::Zero => {
                if let Some(f) = f {
                    exec(f, env)
                }
            }
            Bit::X => {
                // Both paths run on copies and the results are merged, so an
                // unknown condition never yields a more defined state than
                // either branch.
                let mut a = Env {
                    values: env.values.clone(),
                    pending: env.pending.clone(),
                };
                exec(t, &mut a);
                if let Some(f) = f {
                    exec(f, env);
                }
                merge_env(env, &a);
            }
        },
        CStmt::Case {
            selector,
            width,
            arms,
            default,
        } => {
            let sel = eval(selector, *width, &env.values);
            if sel.has_x() {
                if let Some(d) = default {
                    exec(d, env);
                }
                return;
            }
            for (labels, body) in arms {
                let hit = labels.iter().any(|(l, wild)| {
                    let lw = eval(l, *width, &env.values);
                    let care = !wild & !lw.unknown_mask();
                    lw.unknown_mask() & !wild == 0 && (lw.raw_value() ^ sel.raw_value()) & care == 0
                });
                if hit {
                    exec(body, env);
                    return;
                }
            }
            if let Some(d) = default {
                exec(d, env);
            }
        }
    }
}

fn merge_env(env: &mut Env, other: &Env) {
    for i in 0..env.values.len() {
        env.values[i] = env.values[i].merge(&other.values[i]);
    }
    for i in 0..env.pending.len() {
        env.pending[i] = match (env.pending[i], other.pending[i]) {
            (None, None) => None,
            (Some(a), Some(b)) => Some(a.merge(&b)),
            (Some(a), None) => Some(a.merge(&other.values[i])),
            (None, Some(b)) => Some(b.merge(&env.values[i])),
        };
    }
}

/// One cycle from an explicit state.
pub fn step(
    m: &RtlModule,
    st: &SimState,
    inputs: &BTreeMap<String, Word>,
) -> Result<SimState, SimError> {
    let mut sim = Simulator::new(m);
    sim.set_state(st)?;
    sim.step(inputs)?;
    Ok(sim.state())
}

/// Simulates from the all-unknown state, recording `observe` after each step.
pub fn run(
    m: &RtlModule,
    stimulus: &[BTreeMap<String, Word>],
    observe: &[&str],
) -> Result<Trace, SimError> {
    let mut sim = Simulator::new(m);
    let cols: Vec<usize> = observe
        .iter()
        .map(|n| {
            sim.signal_index(n)
                .ok_or_else(|| SimError::UnknownSignal(n.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(stimulus.len());
    for (cycle, inputs) in stimulus.iter().enumerate() {
        sim.step(inputs).map_err(|e| SimError::AtCycle {
            cycle,
            source: Box::new(e),
        })?;
        rows.push(cols.iter().map(|c| sim.value_at(*c)).collect());
    }
    Ok(Trace {
        signals: observe.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}
