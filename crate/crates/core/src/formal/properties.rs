use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::microtests::{Predicate, Relation};
use crate::rtl::ast::*;
use crate::rtl::{stmt_reads, Trace, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropertyClass {
    Reset,
    Range,
    StateEncoding,
    TemporalUser,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// Subject is known on the first cycle after `reset` falls.
    KnownAfterReset { reset: String },
    /// Subject, when known, is one of `values`.
    InSet { values: Vec<Word> },
    /// Subject, when known, has exactly one bit set.
    OneHot,
    /// From `from_cycle` on, subject (when known) relates to `value`.
    Relation {
        relation: Relation,
        value: Word,
        from_cycle: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Property {
    pub id: String,
    pub class: PropertyClass,
    pub subject: String,
    pub condition: Condition,
    pub description: String,
}

/// Read access to the rows at `t - 1` and `t`.
pub trait Rows {
    fn cur(&self, name: &str) -> Option<Word>;
    fn prev(&self, name: &str) -> Option<Word>;
    fn cycle(&self) -> usize;
}

pub(crate) struct TraceRows<'a> {
    pub trace: &'a Trace,
    pub t: usize,
}

impl Rows for TraceRows<'_> {
    fn cur(&self, name: &str) -> Option<Word> {
        self.trace.get(self.t, name)
    }
    fn prev(&self, name: &str) -> Option<Word> {
        self.t.checked_sub(1).and_then(|p| self.trace.get(p, name))
    }
    fn cycle(&self) -> usize {
        self.t
    }
}

impl Property {
    /// Total: missing signals make the property hold.
    pub fn holds(&self, rows: &dyn Rows) -> bool {
        let Some(v) = rows.cur(&self.subject) else {
            return true;
        };
        match &self.condition {
            Condition::KnownAfterReset { reset } => {
                let fell = rows.prev(reset).and_then(|w| w.value()) == Some(1)
                    && rows.cur(reset).and_then(|w| w.value()) == Some(0);
                !fell || !v.has_x()
            }
            Condition::InSet { .. } | Condition::OneHot => self.predicate(v.width()).holds(&v),
            Condition::Relation { from_cycle, .. } => {
                rows.cycle() < *from_cycle || self.predicate(v.width()).holds(&v)
            }
        }
    }

    pub fn holds_on(&self, trace: &Trace, t: usize) -> bool {
        self.holds(&TraceRows { trace, t })
    }

    /// The single-cycle check a micro-test asserts at the violating cycle.
    pub fn predicate(&self, width: u32) -> Predicate {
        match &self.condition {
            Condition::KnownAfterReset { .. } => Predicate::NonX,
            Condition::InSet { values } => Predicate::InSet {
                values: values.clone(),
            },
            Condition::OneHot => Predicate::InSet {
                values: (0..width).map(|b| Word::new(width, 1u128 << b)).collect(),
            },
            Condition::Relation {
                relation, value, ..
            } => Predicate::Compare {
                relation: *relation,
                value: *value,
            },
        }
    }

    /// Largest `from_cycle` that gates this property.
    pub(crate) fn gate(&self) -> usize {
        match &self.condition {
            Condition::Relation { from_cycle, .. } => *from_cycle,
            _ => 0,
        }
    }
}

/// One record of the optional `props.json` sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserAssertion {
    pub signal: String,
    pub relation: Relation,
    /// Decimal integer or Verilog literal text.
    pub value: serde_json::Value,
    #[serde(default)]
    pub from_cycle: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SidecarError {
    #[error("props.json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("props.json record {index}: bad value `{value}`")]
    BadValue { index: usize, value: String },
}

pub fn parse_user_assertions(text: &str) -> Result<Vec<UserAssertion>, SidecarError> {
    let v: Vec<UserAssertion> = serde_json::from_str(text)?;
    for (index, a) in v.iter().enumerate() {
        if assertion_value(a, 32).is_none() {
            return Err(SidecarError::BadValue {
                index,
                value: a.value.to_string(),
            });
        }
    }
    Ok(v)
}

fn assertion_value(a: &UserAssertion, width: u32) -> Option<Word> {
    match &a.value {
        serde_json::Value::Number(n) => n.as_u64().map(|v| Word::new(width, v as u128)),
        serde_json::Value::String(s) => {
            let toks = crate::rtl::tokenize(s).ok()?;
            match toks.first().map(|t| &t.kind) {
                Some(crate::rtl::TokenKind::Number(l)) if toks.len() == 2 => Some(l.to_word(width)),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Structural property mining. The reset port is taken from `header` when
/// given, else from `m`.
pub fn mine_properties(
    m: &RtlModule,
    header: Option<&RtlModule>,
    user: &[UserAssertion],
) -> Vec<Property> {
    let mut out = Vec::new();
    let reset = header
        .and_then(|h| h.reset_port())
        .or_else(|| m.reset_port());
    let regs = m.state_registers();

    if let Some(rst) = reset {
        for reg in reset_subjects(m, rst) {
            out.push(Property {
                id: format!("reset:{reg}"),
                class: PropertyClass::Reset,
                subject: reg.clone(),
                condition: Condition::KnownAfterReset {
                    reset: rst.to_string(),
                },
                description: format!("`{reg}` is known on the first cycle after `{rst}` deasserts"),
            });
        }
    }

    let writes = collect_writes(m);
    let enumerable = enumerable_regs(&writes);
    for (reg, labels) in case_label_sets(m) {
        if !regs.contains(&reg.as_str()) || !enumerable.contains(&reg) {
            continue;
        }
        let text = labels
            .iter()
            .map(|w| w.value().unwrap_or(0).to_string())
            .collect::<Vec<_>>()
            .join(", ");
        out.push(Property {
            id: format!("range:{reg}"),
            class: PropertyClass::Range,
            subject: reg.clone(),
            condition: Condition::InSet { values: labels },
            description: format!("`{reg}` stays in {{{text}}}"),
        });
    }

    for reg in &regs {
        let w = m.signal(reg).map_or(1, |s| s.width);
        if w >= 2 && is_one_hot_reg(reg, &writes) {
            out.push(Property {
                id: format!("onehot:{reg}"),
                class: PropertyClass::StateEncoding,
                subject: reg.to_string(),
                condition: Condition::OneHot,
                description: format!("`{reg}` is one-hot"),
            });
        }
    }

    for (i, a) in user.iter().enumerate() {
        let width = m.signal(&a.signal).map_or(32, |s| s.width);
        let Some(value) = assertion_value(a, width) else {
            continue;
        };
        out.push(Property {
            id: format!("user:{i}:{}", a.signal),
            class: PropertyClass::TemporalUser,
            subject: a.signal.clone(),
            condition: Condition::Relation {
                relation: a.relation,
                value,
                from_cycle: a.from_cycle,
            },
            description: format!(
                "`{}` {:?} {} from cycle {}",
                a.signal,
                a.relation,
                value.value().unwrap_or(0),
                a.from_cycle
            ),
        });
    }
    out
}

/// Registers written by a clocked process that reads `rst`.
fn reset_subjects(m: &RtlModule, rst: &str) -> Vec<String> {
    let mut written: BTreeSet<String> = BTreeSet::new();
    for p in m.processes.iter().filter(|p| p.trigger.is_clocked()) {
        let reads_rst =
            p.trigger.reset() == Some(rst) || stmt_reads(&p.body).iter().any(|r| r == rst);
        if reads_rst {
            written.extend(p.body.assigned_signals());
        }
    }
    m.state_registers()
        .into_iter()
        .filter(|r| written.contains(*r))
        .map(String::from)
        .collect()
}

enum Write<'a> {
    Whole(&'a Expr),
    Partial,
}

fn collect_writes(m: &RtlModule) -> BTreeMap<String, Vec<Write<'_>>> {
    let mut out: BTreeMap<String, Vec<Write<'_>>> = BTreeMap::new();
    for a in &m.assigns {
        record(&a.lhs, &a.rhs, &mut out);
    }
    for p in &m.processes {
        p.body.walk(&mut |s| {
            if let Stmt::Assign { lhs, rhs, .. } = s {
                record(lhs, rhs, &mut out);
            }
        });
    }
    out
}

fn record<'a>(lhs: &LValue, rhs: &'a Expr, out: &mut BTreeMap<String, Vec<Write<'a>>>) {
    match lhs {
        LValue::Whole { name } => out.entry(name.clone()).or_default().push(Write::Whole(rhs)),
        other => {
            for t in other.targets() {
                out.entry(t.to_string()).or_default().push(Write::Partial);
            }
        }
    }
}

/// Signals whose every write is a constant or a copy of another such signal.
fn enumerable_regs(writes: &BTreeMap<String, Vec<Write<'_>>>) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = writes.keys().cloned().collect();
    loop {
        let before = set.len();
        let keep: BTreeSet<String> = set
            .iter()
            .filter(|n| {
                writes[*n].iter().all(|w| match w {
                    Write::Whole(e) => {
                        e.constant().is_some()
                            || matches!(&e.kind, ExprKind::Signal { name } if set.contains(name))
                    }
                    Write::Partial => false,
                })
            })
            .cloned()
            .collect();
        set = keep;
        if set.len() == before {
            return set;
        }
    }
}

/// Constant labels of `case` statements whose selector is a plain signal.
fn case_label_sets(m: &RtlModule) -> BTreeMap<String, Vec<Word>> {
    let mut out: BTreeMap<String, (u32, BTreeSet<u128>)> = BTreeMap::new();
    for p in &m.processes {
        p.body.walk(&mut |s| {
            if let Stmt::Case { selector, arms, .. } = s {
                if let ExprKind::Signal { name } = &selector.kind {
                    let w = m.signal(name).map_or(1, |s| s.width);
                    let (_, set) = out.entry(name.clone()).or_insert((w, BTreeSet::new()));
                    for a in arms {
                        for l in &a.labels {
                            let wild = matches!(&l.kind, ExprKind::Literal { literal } if literal.wildcard != 0);
                            if let Some(c) = l.constant().filter(|_| !wild) {
                                if let Some(v) = c.resize(w).value() {
                                    set.insert(v);
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    out.into_iter()
        .filter(|(_, (_, v))| !v.is_empty())
        .map(|(k, (w, v))| (k, v.into_iter().map(|x| Word::new(w, x)).collect()))
        .collect()
}

fn is_one_hot_reg(reg: &str, writes: &BTreeMap<String, Vec<Write<'_>>>) -> bool {
    let Some(ws) = writes.get(reg) else {
        return false;
    };
    let mut constants = BTreeSet::new();
    for w in ws {
        match w {
            Write::Whole(e) => match e.constant() {
                Some(c) => match c.value() {
                    Some(v) if v.count_ones() == 1 => {
                        constants.insert(v);
                    }
                    _ => return false,
                },
                // rotations of the register itself keep the encoding
                None => match &e.kind {
                    ExprKind::Concat { items } => {
                        if !items.iter().all(|i| i.signals().iter().all(|s| *s == reg)) {
                            return false;
                        }
                    }
                    _ => return false,
                },
            },
            Write::Partial => return false,
        }
    }
    !constants.is_empty()
}
