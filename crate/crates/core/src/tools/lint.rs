use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::config::{ToolMode, ToolsConfig};
use super::process::{expand_argv, run_external, ExitKind, ToolResult};
use super::Job;
use crate::rtl::ast::*;
use crate::rtl::{stmt_reads, SourceUnit};

pub const RULE_CASE_DEFAULT: &str = "case-no-default";
pub const RULE_LATCH: &str = "latch";
pub const RULE_BLOCKING_CLOCKED: &str = "blocking-in-clocked";
pub const RULE_UNUSED: &str = "unused-net";
pub const RULE_WIDTH: &str = "width-mismatch";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LintWarning {
    pub rule: String,
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintReport {
    pub warnings: Vec<LintWarning>,
    /// Distinct `(rule, line)` pairs.
    pub unique_count: usize,
    pub tool: Option<ToolResult>,
}

impl LintReport {
    pub fn from_warnings(mut warnings: Vec<LintWarning>, tool: Option<ToolResult>) -> Self {
        warnings.sort_by(|a, b| (a.line, &a.rule, &a.text).cmp(&(b.line, &b.rule, &b.text)));
        warnings.dedup();
        let unique_count = warnings
            .iter()
            .map(|w| (w.rule.as_str(), w.line))
            .collect::<BTreeSet<_>>()
            .len();
        LintReport {
            warnings,
            unique_count,
            tool,
        }
    }
}

/// Lints a candidate that already compiled. `m` is its elaborated form.
pub fn lint(candidate: &SourceUnit, m: &RtlModule, cfg: &ToolsConfig, job: &Job) -> LintReport {
    if cfg.lint.mode == ToolMode::External {
        let tool = match job.prepare(cfg, candidate.text(), None) {
            Ok(ws) => run_external(
                &expand_argv(&cfg.lint.argv, &ws.src, &ws.tb, &ws.out),
                &ws.dir,
                cfg.lint.timeout_s,
            ),
            Err(e) => ToolResult {
                ok: false,
                exit_kind: ExitKind::ToolError,
                stdout_digest: e.to_string(),
                elapsed: 0.0,
                workspace: None,
            },
        };
        if !(tool.exit_kind == ExitKind::NotInstalled && cfg.fallback_to_builtin) {
            let ws = parse_lint_output(&tool.stdout_digest);
            return LintReport::from_warnings(ws, Some(tool));
        }
    }
    lint_builtin(m)
}

pub fn lint_builtin(m: &RtlModule) -> LintReport {
    let mut out = Vec::new();
    for p in &m.processes {
        p.body.walk(&mut |s| {
            if let Stmt::Case {
                selector,
                arms,
                default: None,
                line,
                ..
            } = s
            {
                if !case_is_full(m, selector, arms) {
                    out.push(LintWarning {
                        rule: RULE_CASE_DEFAULT.into(),
                        line: *line,
                        text: "case statement has no default arm".into(),
                    });
                }
            }
        });
        if p.trigger.is_clocked() {
            for line in &p.blocking_in_clocked {
                out.push(LintWarning {
                    rule: RULE_BLOCKING_CLOCKED.into(),
                    line: *line,
                    text: "blocking assignment in clocked process".into(),
                });
            }
        } else {
            let must = must_assign(&p.body, m);
            for sig in p.body.assigned_signals() {
                if !must.contains(&sig) {
                    out.push(LintWarning {
                        rule: RULE_LATCH.into(),
                        line: first_assignment_line(&p.body, &sig).unwrap_or(p.line),
                        text: format!("`{sig}` is not assigned on every path; latch inferred"),
                    });
                }
            }
        }
    }

    let mut read: BTreeSet<String> = BTreeSet::new();
    for a in &m.assigns {
        read.extend(a.rhs.signals().into_iter().map(String::from));
        read.extend(a.lhs.index_reads().into_iter().map(String::from));
    }
    for p in &m.processes {
        read.extend(stmt_reads(&p.body));
        if let Some(c) = p.trigger.clock() {
            read.insert(c.to_string());
        }
    }
    for n in &m.nets {
        if !read.contains(&n.name) {
            out.push(LintWarning {
                rule: RULE_UNUSED.into(),
                line: n.line,
                text: format!("`{}` is declared but never read", n.name),
            });
        }
    }

    let mut width_check = |lhs: &LValue, rhs: &Expr, line: usize| {
        if let ExprKind::Literal { literal } = &rhs.kind {
            let lw = m.lvalue_width(lhs);
            if let Some(size) = literal.size {
                if size != lw {
                    out.push(LintWarning {
                        rule: RULE_WIDTH.into(),
                        line,
                        text: format!("{size}-bit literal assigned to {lw}-bit target"),
                    });
                }
            }
        }
    };
    for a in &m.assigns {
        width_check(&a.lhs, &a.rhs, a.line);
    }
    for p in &m.processes {
        p.body.walk(&mut |s| {
            if let Stmt::Assign { lhs, rhs, line, .. } = s {
                width_check(lhs, rhs, *line);
            }
        });
    }
    LintReport::from_warnings(out, None)
}

/// True when the constant labels cover every selector value.
fn case_is_full(m: &RtlModule, selector: &Expr, arms: &[CaseArm]) -> bool {
    let w = m.expr_width(selector);
    if w > 16 {
        return false;
    }
    let mut seen = BTreeSet::new();
    for a in arms {
        for l in &a.labels {
            match &l.kind {
                ExprKind::Literal { literal } if literal.wildcard != 0 => {
                    // expand wildcard bits
                    let base = literal.value & !literal.wildcard;
                    let wild: Vec<u32> = (0..w)
                        .filter(|b| (literal.wildcard >> b) & 1 == 1)
                        .collect();
                    if wild.len() > 16 {
                        return true;
                    }
                    for k in 0..(1u128 << wild.len()) {
                        let mut v = base;
                        for (i, b) in wild.iter().enumerate() {
                            v |= ((k >> i) & 1) << b;
                        }
                        seen.insert(v & ((1u128 << w) - 1));
                    }
                }
                _ => {
                    if let Some(v) = l.constant().and_then(|c| c.resize(w).value()) {
                        seen.insert(v);
                    }
                }
            }
        }
    }
    seen.len() as u128 == 1u128 << w
}

/// Signals assigned in full on every path through `s`.
fn must_assign(s: &Stmt, m: &RtlModule) -> BTreeSet<String> {
    match s {
        Stmt::Null { .. } => BTreeSet::new(),
        Stmt::Assign { lhs, .. } => full_targets(lhs),
        Stmt::Block { stmts, .. } => stmts.iter().flat_map(|s| must_assign(s, m)).collect(),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => match else_branch {
            Some(e) => must_assign(then_branch, m)
                .intersection(&must_assign(e, m))
                .cloned()
                .collect(),
            None => BTreeSet::new(),
        },
        Stmt::Case {
            selector,
            arms,
            default,
            ..
        } => {
            let mut paths: Vec<BTreeSet<String>> =
                arms.iter().map(|a| must_assign(&a.body, m)).collect();
            match default {
                Some(d) => paths.push(must_assign(d, m)),
                None if case_is_full(m, selector, arms) => {}
                None => return BTreeSet::new(),
            }
            let mut it = paths.into_iter();
            let first = it.next().unwrap_or_default();
            it.fold(first, |acc, p| acc.intersection(&p).cloned().collect())
        }
    }
}

fn full_targets(lv: &LValue) -> BTreeSet<String> {
    match lv {
        LValue::Whole { name } => BTreeSet::from([name.clone()]),
        LValue::Concat { parts } => parts.iter().flat_map(full_targets).collect(),
        _ => BTreeSet::new(),
    }
}

fn first_assignment_line(s: &Stmt, sig: &str) -> Option<usize> {
    let mut found = None;
    s.walk(&mut |s| {
        if found.is_none() {
            if let Stmt::Assign { lhs, line, .. } = s {
                if lhs.targets().contains(&sig) {
                    found = Some(*line);
                }
            }
        }
    });
    found
}

/// Parses line-oriented linter output. Verilator-style `%Warning-CODE:` heads
/// supply the rule id; anything else is filed under `external`.
pub fn parse_lint_output(output: &str) -> Vec<LintWarning> {
    let re =
        Regex::new(r"^(?:%(?:Warning|Error)-?([\w-]*):\s*)?[^\s:]+\.s?vh?:(\d+):(?:\d+:)?\s*(.*)$")
            .expect("valid regex");
    output
        .lines()
        .filter_map(|l| {
            let c = re.captures(l.trim())?;
            let rule = c
                .get(1)
                .map(|m| m.as_str())
                .filter(|s| !s.is_empty())
                .unwrap_or("external")
                .to_string();
            Some(LintWarning {
                rule,
                line: c[2].parse().ok()?,
                text: c[3].to_string(),
            })
        })
        .collect()
}
