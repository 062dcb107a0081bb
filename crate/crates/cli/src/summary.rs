use std::fmt::Write as _;

use hdlforge::agents::EpisodeSummary;
use hdlforge::bench::{latency_stats, LatencyStats};
use serde::{Deserialize, Serialize};

pub const SUMMARY_SCHEMA: u32 = 1;

/// One task's outcome; `error` is set when the task never ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<EpisodeSummary>,
}

impl TaskRecord {
    pub fn ok(s: EpisodeSummary) -> Self {
        TaskRecord {
            task: s.task.clone(),
            error: None,
            episode: Some(s),
        }
    }

    pub fn failed(task: impl Into<String>, error: impl Into<String>) -> Self {
        TaskRecord {
            task: task.into(),
            error: Some(error.into()),
            episode: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub tasks: usize,
    pub completed: usize,
    pub errors: usize,
    pub passed: usize,
    /// Percent of completed episodes.
    pub pass_rate_pct: f64,
    pub escalation_pct: f64,
    /// Over completed episodes' total time.
    pub latency: Option<LatencyStats>,
    pub records: Vec<TaskRecord>,
}

fn pct(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

impl RunSummary {
    pub fn new(records: Vec<TaskRecord>) -> Self {
        let eps: Vec<&EpisodeSummary> = records.iter().filter_map(|r| r.episode.as_ref()).collect();
        let passed = eps.iter().filter(|e| e.passed).count();
        let escalated = eps.iter().filter(|e| e.stage_b_used).count();
        let times: Vec<f64> = eps.iter().map(|e| e.total_s).collect();
        RunSummary {
            schema: SUMMARY_SCHEMA,
            tasks: records.len(),
            completed: eps.len(),
            errors: records.len() - eps.len(),
            passed,
            pass_rate_pct: pct(passed, eps.len()),
            escalation_pct: pct(escalated, eps.len()),
            latency: latency_stats(&times).ok(),
            records,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Human-readable table plus aggregate lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let w = self
            .records
            .iter()
            .map(|r| r.task.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let _ = writeln!(
            s,
            "{:<w$}  {:<6}  {:>8}  {:>7}  {:>9}  reason",
            "task", "result", "attempts", "stage_b", "total_s"
        );
        for r in &self.records {
            match (&r.episode, &r.error) {
                (Some(e), _) => {
                    let _ = writeln!(
                        s,
                        "{:<w$}  {:<6}  {:>8}  {:>7}  {:>9.3}  {:?}",
                        r.task,
                        if e.passed { "pass" } else { "fail" },
                        e.attempts,
                        if e.stage_b_used { "yes" } else { "no" },
                        e.total_s,
                        e.final_reason
                    );
                }
                (None, err) => {
                    let _ = writeln!(
                        s,
                        "{:<w$}  error   {}",
                        r.task,
                        err.as_deref().unwrap_or("unknown")
                    );
                }
            }
        }
        let _ = writeln!(
            s,
            "tasks {}  completed {}  errors {}",
            self.tasks, self.completed, self.errors
        );
        let _ = writeln!(
            s,
            "pass rate {:.1}%  escalation {:.1}%",
            self.pass_rate_pct, self.escalation_pct
        );
        match &self.latency {
            Some(l) => {
                let _ = writeln!(
                    s,
                    "latency_s median {:.3}  mean {:.3}  p90 {:.3}  p95 {:.3}",
                    l.median, l.mean, l.p90, l.p95
                );
            }
            None => {
                let _ = writeln!(s, "latency_s n/a");
            }
        }
        s
    }
}
