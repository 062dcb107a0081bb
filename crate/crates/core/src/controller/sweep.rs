use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::decide::{decide, DecisionKind};
use crate::bench::latency_stats;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SweepError {
    #[error("no episodes to replay")]
    EmptyEpisodes,
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("threshold {0} is outside [0, 1]")]
    TauOutOfRange(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub z: f64,
    pub time_s: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBRecord {
    pub time_s: f64,
    pub passed: bool,
}

/// Recorded Stage-A attempts of one episode and, if it ran, its Stage-B call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task: String,
    pub r: usize,
    pub stage_a: Vec<AttemptRecord>,
    pub stage_b: Option<StageBRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub passed: bool,
    pub time_s: f64,
    pub escalated: bool,
    pub attempts: usize,
    /// The replay needed data the recording does not have.
    pub censored: bool,
}

/// Re-decides one trajectory under `tau`. When the threshold would keep Stage
/// A going past the recorded attempts, the recorded escalation is used at the
/// point the data ends and the replay is marked censored.
pub fn replay(t: &Trajectory, tau: f64) -> Replay {
    let mut time = 0.0;
    let mut k = 0;
    loop {
        if k == t.stage_a.len() {
            let (passed, dt) = t
                .stage_b
                .as_ref()
                .map_or((false, 0.0), |b| (b.passed, b.time_s));
            return Replay {
                passed,
                time_s: time + dt,
                escalated: t.stage_b.is_some(),
                attempts: k,
                censored: true,
            };
        }
        let a = &t.stage_a[k];
        k += 1;
        time += a.time_s;
        let d = decide(a.z, tau, k, t.r, a.passed, false);
        match d.kind {
            DecisionKind::Accept => {
                return Replay {
                    passed: true,
                    time_s: time,
                    escalated: false,
                    attempts: k,
                    censored: false,
                }
            }
            DecisionKind::RetryStageA => continue,
            DecisionKind::EscalateStageB | DecisionKind::Terminate => {
                let (passed, dt, censored) = match &t.stage_b {
                    Some(b) => (b.passed, b.time_s, false),
                    None => (false, 0.0, true),
                };
                return Replay {
                    passed,
                    time_s: time + dt,
                    escalated: true,
                    attempts: k,
                    censored,
                };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub episodes: usize,
    pub pass_rate: f64,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    pub escalation_rate: f64,
    /// Decisions that escalated, summed over episodes.
    pub escalations: usize,
    pub censored: usize,
}

pub fn sweep_tau(episodes: &[Trajectory], grid: &[f64]) -> Result<Vec<SweepRow>, SweepError> {
    if episodes.is_empty() {
        return Err(SweepError::EmptyEpisodes);
    }
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(SweepError::TauOutOfRange(t.to_string()));
    }
    Ok(grid
        .iter()
        .map(|&tau| {
            let rs: Vec<Replay> = episodes.iter().map(|e| replay(e, tau)).collect();
            let n = rs.len() as f64;
            let times: Vec<f64> = rs.iter().map(|r| r.time_s).collect();
            let stats = latency_stats(&times).expect("nonempty");
            let escalations = rs.iter().filter(|r| r.escalated).count();
            SweepRow {
                tau,
                episodes: rs.len(),
                pass_rate: rs.iter().filter(|r| r.passed).count() as f64 / n,
                mean_time_s: stats.mean,
                median_time_s: stats.median,
                escalation_rate: escalations as f64 / n,
                escalations,
                censored: rs.iter().filter(|r| r.censored).count(),
            }
        })
        .collect())
}

pub const SWEEP_CSV_HEADER: &str =
    "tau,episodes,pass_rate,mean_time_s,median_time_s,escalation_rate,escalations,censored";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{},{}\n",
            r.tau,
            r.episodes,
            r.pass_rate,
            r.mean_time_s,
            r.median_time_s,
            r.escalation_rate,
            r.escalations,
            r.censored
        ));
    }
    out
}
