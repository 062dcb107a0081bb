//! The five escalation signals and the candidate ranking key.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::tools::CompileReport;

/// `[s_comp, s_lint, s_smoke, s_trace, s_budget]`, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticVector {
    pub s_comp: f64,
    pub s_lint: f64,
    pub s_smoke: f64,
    pub s_trace: f64,
    pub s_budget: f64,
}

impl Default for DiagnosticVector {
    /// Every signal unavailable: zeros, except `s_trace = 1/2`.
    fn default() -> Self {
        DiagnosticVector {
            s_comp: 0.0,
            s_lint: 0.0,
            s_smoke: 0.0,
            s_trace: 0.5,
            s_budget: 0.0,
        }
    }
}

impl DiagnosticVector {
    pub const NAMES: [&'static str; 5] = ["comp", "lint", "smoke", "trace", "budget"];

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.s_comp,
            self.s_lint,
            self.s_smoke,
            self.s_trace,
            self.s_budget,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        DiagnosticVector {
            s_comp: a[0],
            s_lint: a[1],
            s_smoke: a[2],
            s_trace: a[3],
            s_budget: a[4],
        }
    }

    pub fn in_unit_range(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Where the official testbench first disagreed with a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailurePoint {
    pub signal: String,
    pub cycle: usize,
}

impl FailurePoint {
    pub fn new(signal: impl Into<String>, cycle: usize) -> Self {
        FailurePoint {
            signal: signal.into(),
            cycle,
        }
    }
}

pub fn comp_signal(report: &CompileReport) -> f64 {
    if report.built {
        1.0
    } else {
        0.0
    }
}

pub fn lint_signal(lint_count: usize, l_lint: usize) -> f64 {
    assert!(l_lint >= 1, "L_lint must be at least 1");
    1.0 - lint_count.min(l_lint) as f64 / l_lint as f64
}

/// Mean of the per-cycle match bits; `None` when there is nothing to average.
pub fn smoke_signal(match_bits: &[bool]) -> Option<f64> {
    if match_bits.is_empty() {
        return None;
    }
    Some(match_bits.iter().filter(|b| **b).count() as f64 / match_bits.len() as f64)
}

/// Trace stability between the current and previous failure points. Without
/// a previous failure the value is 1/2; without a current one see
/// [`TraceHistory`].
pub fn trace_signal(
    cur: Option<&FailurePoint>,
    prev: Option<&FailurePoint>,
    dt_wave: usize,
) -> f64 {
    assert!(dt_wave >= 1, "dt_wave must be at least 1");
    match (cur, prev) {
        (Some(c), Some(p)) => {
            let same = if c.signal == p.signal { 0.5 } else { 0.0 };
            let dt = c.cycle.abs_diff(p.cycle).min(dt_wave) as f64;
            same + 0.5 * (1.0 - dt / dt_wave as f64)
        }
        _ => 0.5,
    }
}

/// Carries the previous failure point and trace value across attempts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceHistory {
    pub prev: Option<FailurePoint>,
    pub last: Option<f64>,
}

impl TraceHistory {
    /// Records this attempt's failure point (if any) and returns `s_trace`.
    /// An attempt without a failure point repeats the prior value.
    pub fn observe(&mut self, cur: Option<&FailurePoint>, dt_wave: usize) -> f64 {
        let v = match cur {
            None => self.last.unwrap_or(0.5),
            Some(c) => {
                let v = trace_signal(Some(c), self.prev.as_ref(), dt_wave);
                self.prev = Some(c.clone());
                v
            }
        };
        self.last = Some(v);
        v
    }
}

pub fn budget_signal(used: usize, r: usize) -> f64 {
    assert!(r >= 1, "r must be at least 1");
    1.0 - used.min(r) as f64 / r as f64
}

/// Per-candidate summary used to pick the one sent to full testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDiag {
    pub id: u32,
    pub s_comp: f64,
    pub smoke_fraction: f64,
    pub lint_count: usize,
}

impl CandidateDiag {
    /// Lexicographic: compiles, then smoke fraction, then fewer warnings,
    /// then lower id. `Less` means ranked earlier.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .s_comp
            .total_cmp(&self.s_comp)
            .then(other.smoke_fraction.total_cmp(&self.smoke_fraction))
            .then(self.lint_count.cmp(&other.lint_count))
            .then(self.id.cmp(&other.id))
    }
}

/// Best first.
pub fn rank_candidates(diags: &[CandidateDiag]) -> Vec<CandidateDiag> {
    let mut v = diags.to_vec();
    v.sort_by(CandidateDiag::rank_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cd(id: u32, c: f64, s: f64, l: usize) -> CandidateDiag {
        CandidateDiag {
            id,
            s_comp: c,
            smoke_fraction: s,
            lint_count: l,
        }
    }

    #[test]
    fn signal_examples() {
        assert_eq!(lint_signal(0, 30), 1.0);
        assert_eq!(lint_signal(30, 30), 0.0);
        assert!((lint_signal(15, 30) - 0.5).abs() < 1e-12);
        assert_eq!(budget_signal(0, 5), 1.0);
        assert_eq!(budget_signal(5, 5), 0.0);
        assert!((budget_signal(2, 5) - 0.6).abs() < 1e-12);
        assert_eq!(smoke_signal(&[]), None);
        let bits: Vec<bool> = (0..100).map(|i| i < 73).collect();
        assert!((smoke_signal(&bits).unwrap() - 0.73).abs() < 1e-12);
        let a = FailurePoint::new("q", 10);
        assert_eq!(trace_signal(Some(&a), None, 64), 0.5);
        assert_eq!(trace_signal(Some(&a), Some(&a), 64), 1.0);
        assert_eq!(
            trace_signal(Some(&a), Some(&FailurePoint::new("p", 200)), 64),
            0.0
        );
    }

    #[test]
    fn history_repeats_prior_value_without_failure() {
        let mut h = TraceHistory::default();
        assert_eq!(h.observe(None, 64), 0.5);
        assert_eq!(h.observe(Some(&FailurePoint::new("q", 3)), 64), 0.5);
        assert_eq!(h.observe(Some(&FailurePoint::new("q", 3)), 64), 1.0);
        assert_eq!(h.observe(None, 64), 1.0);
        assert_eq!(h.observe(Some(&FailurePoint::new("p", 3)), 64), 0.5);
    }

    #[test]
    fn ranking_examples() {
        let r = rank_candidates(&[cd(0, 0.0, 0.0, 0), cd(1, 1.0, 0.0, 9)]);
        assert_eq!(r[0].id, 1);
        let r = rank_candidates(&[cd(0, 1.0, 0.5, 7), cd(1, 1.0, 0.5, 2)]);
        assert_eq!(r[0].id, 1);
        let r = rank_candidates(&[cd(4, 1.0, 0.5, 2), cd(2, 1.0, 0.5, 2)]);
        assert_eq!(r[0].id, 2);
    }
}
