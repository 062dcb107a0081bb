//! Single-fault mutators. Each class enumerates its mutable sites in source
//! order and the seed picks one; the edit is patched into the original text
//! so every other line is untouched.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rtl::ast::{AssignKind, BinaryOp, Expr, ExprKind, LValue, Stmt};
use crate::rtl::{parse_module, RtlModule, SourceUnit, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BugClass {
    /// A strict comparison made non-strict (or the reverse), or an equality
    /// constant moved by one.
    OffByOne,
    /// An assignment in a reset branch deleted.
    Reset,
    /// A state transition redirected to the arm's own state.
    Fsm,
    /// A non-blocking assignment read later in the same process made
    /// blocking.
    TemporalRace,
}

impl BugClass {
    pub const ALL: [BugClass; 4] = [
        BugClass::OffByOne,
        BugClass::Reset,
        BugClass::Fsm,
        BugClass::TemporalRace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BugClass::OffByOne => "off-by-one",
            BugClass::Reset => "reset",
            BugClass::Fsm => "fsm",
            BugClass::TemporalRace => "temporal-race",
        }
    }
}

impl fmt::Display for BugClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BugClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        BugClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown bug class `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugSpec {
    pub class: BugClass,
    pub seed: u64,
    /// Line of the edited statement or expression.
    pub line: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutant {
    pub spec: BugSpec,
    pub source: SourceUnit,
    /// Signal whose driver was edited.
    pub target: String,
    /// Lines a fix has to touch: the edited line, plus the guarding `if` for
    /// a deleted reset assignment.
    pub site_lines: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InjectError {
    #[error("no mutable site for class {0}")]
    NoMutableSite(BugClass),
    #[error("mutant does not parse: {0}")]
    MutantUnparseable(String),
}

#[derive(Debug, Clone)]
struct Site {
    span: Span,
    with: String,
    line: usize,
    first_line: usize,
    target: String,
    description: String,
}

pub fn inject(
    src: &SourceUnit,
    m: &RtlModule,
    class: BugClass,
    seed: u64,
) -> Result<Mutant, InjectError> {
    let sites = sites(src, m, class);
    if sites.is_empty() {
        return Err(InjectError::NoMutableSite(class));
    }
    let s = &sites[(seed % sites.len() as u64) as usize];
    let source = src.splice(s.span, &s.with);
    parse_module(&source).map_err(|e| InjectError::MutantUnparseable(e.to_string()))?;
    Ok(Mutant {
        spec: BugSpec {
            class,
            seed,
            line: s.line,
            description: s.description.clone(),
        },
        source,
        target: s.target.clone(),
        site_lines: (s.first_line, s.line),
    })
}

/// Number of distinct sites for `class`; seeds beyond it wrap around.
pub fn site_count(src: &SourceUnit, m: &RtlModule, class: BugClass) -> usize {
    sites(src, m, class).len()
}

fn line_of(src: &SourceUnit, span: Span) -> usize {
    src.line_col(span.start).0
}

fn first_target(lhs: &LValue) -> String {
    lhs.targets()
        .first()
        .map(|s| s.to_string())
        .unwrap_or_default()
}

fn sites(src: &SourceUnit, m: &RtlModule, class: BugClass) -> Vec<Site> {
    let mut out = Vec::new();
    match class {
        BugClass::OffByOne => {
            for a in &m.assigns {
                comparisons(src, m, &a.rhs, &first_target(&a.lhs), &mut out);
            }
            for p in &m.processes {
                p.body.walk(&mut |s| match s {
                    Stmt::If { cond, .. } => {
                        let target = s.assigned_signals().into_iter().next().unwrap_or_default();
                        comparisons(src, m, cond, &target, &mut out);
                    }
                    Stmt::Assign { lhs, rhs, .. } => {
                        comparisons(src, m, rhs, &first_target(lhs), &mut out)
                    }
                    _ => {}
                });
            }
        }
        BugClass::Reset => {
            let Some(reset) = m.reset_port() else {
                return out;
            };
            for p in m.processes.iter().filter(|p| p.trigger.is_clocked()) {
                p.body.walk(&mut |s| {
                    if let Stmt::If {
                        cond,
                        then_branch,
                        line,
                        ..
                    } = s
                    {
                        if !cond.signals().contains(&reset) {
                            return;
                        }
                        let guard = *line;
                        then_branch.walk(&mut |t| {
                            if let Stmt::Assign { lhs, span, .. } = t {
                                let text = src.slice(*span);
                                let with = if text.trim_end().ends_with(';') {
                                    ";"
                                } else {
                                    ""
                                };
                                out.push(Site {
                                    span: *span,
                                    with: with.into(),
                                    line: line_of(src, *span),
                                    first_line: guard,
                                    target: first_target(lhs),
                                    description: format!(
                                        "deleted reset assignment `{}`",
                                        text.trim()
                                    ),
                                });
                            }
                        });
                    }
                });
            }
        }
        BugClass::Fsm => {
            for p in &m.processes {
                p.body.walk(&mut |s| {
                    let Stmt::Case { selector, arms, .. } = s else {
                        return;
                    };
                    let ExprKind::Signal { name: state } = &selector.kind else {
                        return;
                    };
                    let width = m.expr_width(selector);
                    for arm in arms {
                        let [label] = arm.labels.as_slice() else {
                            continue;
                        };
                        let ExprKind::Literal { literal: lab } = &label.kind else {
                            continue;
                        };
                        let own = lab.to_word(width);
                        arm.body.walk(&mut |t| {
                            let Stmt::Assign { lhs, rhs, .. } = t else {
                                return;
                            };
                            let (LValue::Whole { name }, ExprKind::Literal { literal }) =
                                (lhs, &rhs.kind)
                            else {
                                return;
                            };
                            if name != state || literal.to_word(width) == own {
                                return;
                            }
                            out.push(Site {
                                span: rhs.span,
                                with: src.slice(label.span).to_string(),
                                line: line_of(src, rhs.span),
                                first_line: line_of(src, rhs.span),
                                target: state.clone(),
                                description: format!(
                                    "state {} now stays in {} instead of moving to {}",
                                    lab.text, lab.text, literal.text
                                ),
                            });
                        });
                    }
                });
            }
        }
        BugClass::TemporalRace => {
            for p in m.processes.iter().filter(|p| p.trigger.is_clocked()) {
                p.body.walk(&mut |s| {
                    let Stmt::Block { stmts, .. } = s else {
                        return;
                    };
                    for (i, a) in stmts.iter().enumerate() {
                        let Stmt::Assign {
                            kind: AssignKind::NonBlocking,
                            lhs,
                            op_span,
                            line,
                            ..
                        } = a
                        else {
                            continue;
                        };
                        let t = first_target(lhs);
                        let read_later = stmts[i + 1..].iter().any(|b| {
                            matches!(b, Stmt::Assign { kind: AssignKind::NonBlocking, rhs, .. }
                                if rhs.signals().contains(&t.as_str()))
                        });
                        if read_later {
                            out.push(Site {
                                span: *op_span,
                                with: "=".into(),
                                line: *line,
                                first_line: *line,
                                description: format!(
                                    "`{t}` assigned with `=` so later reads see the new value"
                                ),
                                target: t,
                            });
                        }
                    }
                });
            }
        }
    }
    out
}

fn comparisons(src: &SourceUnit, m: &RtlModule, e: &Expr, target: &str, out: &mut Vec<Site>) {
    e.walk(&mut |x| {
        let ExprKind::Binary {
            op,
            lhs,
            rhs,
            op_span,
        } = &x.kind
        else {
            return;
        };
        let flipped = match op {
            BinaryOp::Lt => Some(BinaryOp::Le),
            BinaryOp::Le => Some(BinaryOp::Lt),
            BinaryOp::Gt => Some(BinaryOp::Ge),
            BinaryOp::Ge => Some(BinaryOp::Gt),
            _ => None,
        };
        let line = line_of(src, *op_span);
        if let Some(f) = flipped {
            out.push(Site {
                span: *op_span,
                with: f.symbol().into(),
                line,
                first_line: line,
                target: target.to_string(),
                description: format!("`{}` became `{}`", op.symbol(), f.symbol()),
            });
            return;
        }
        if !matches!(op, BinaryOp::Eq | BinaryOp::Ne) {
            return;
        }
        let width = m.expr_width(lhs).max(m.expr_width(rhs));
        for side in [rhs, lhs] {
            if let ExprKind::Literal { literal } = &side.kind {
                let Some(v) = literal.to_word(width).value() else {
                    continue;
                };
                let mask = if width >= 128 {
                    u128::MAX
                } else {
                    (1u128 << width) - 1
                };
                let bumped = v.wrapping_add(1) & mask;
                out.push(Site {
                    span: side.span,
                    with: format!("{width}'d{bumped}"),
                    line: line_of(src, side.span),
                    first_line: line_of(src, side.span),
                    target: target.to_string(),
                    description: format!("constant {} became {width}'d{bumped}", literal.text),
                });
                return;
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = "module c(input wire clk, input wire rst, output reg [1:0] q);\n  always @(posedge clk)\n    if (rst) q <= 2'd0;\n    else if (q < 2'd3) q <= q + 2'd1;\nendmodule\n";

    fn unit() -> (SourceUnit, RtlModule) {
        let s = SourceUnit::new("c.v", COUNTER);
        let m = parse_module(&s).unwrap();
        (s, m)
    }

    #[test]
    fn off_by_one_flips_the_comparison() {
        let (s, m) = unit();
        let mu = inject(&s, &m, BugClass::OffByOne, 0).unwrap();
        assert_eq!(
            mu.source.line_text(4).unwrap().trim(),
            "else if (q <= 2'd3) q <= q + 2'd1;"
        );
        assert_eq!(mu.spec.line, 4);
        assert_eq!(mu.target, "q");
    }

    #[test]
    fn reset_deletes_the_assignment() {
        let (s, m) = unit();
        let mu = inject(&s, &m, BugClass::Reset, 7).unwrap();
        assert_eq!(mu.source.line_text(3).unwrap().trim(), "if (rst) ;");
        assert_eq!(mu.site_lines, (3, 3));
    }

    #[test]
    fn no_site() {
        let (s, m) = unit();
        assert_eq!(
            inject(&s, &m, BugClass::Fsm, 0),
            Err(InjectError::NoMutableSite(BugClass::Fsm))
        );
        assert_eq!(
            inject(&s, &m, BugClass::TemporalRace, 0),
            Err(InjectError::NoMutableSite(BugClass::TemporalRace))
        );
    }
}
