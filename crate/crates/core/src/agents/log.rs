//! Append-only episode records and their JSONL form: one `attempt` line per
//! attempt followed by one `episode` line.

use serde::{Deserialize, Serialize};

use crate::controller::{
    AttemptRecord, Decision, DecisionKind, DecisionReason, LabeledRow, StageBRecord, Trajectory,
};
use crate::diagnostics::{DiagnosticVector, FailurePoint};
use crate::rtl::Word;
use crate::tools::OfficialRunResult;

pub const LOG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: u32,
    pub plan: usize,
    /// Short content hash of the source; empty when extraction failed.
    pub digest: String,
    pub compiled: bool,
    pub lint_count: usize,
    pub smoke_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The official-run fields worth keeping; tool timings are dropped so logs
/// stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfficialSummary {
    pub passed: bool,
    pub fail_signal: Option<String>,
    pub fail_cycle: Option<usize>,
    pub expected: Option<Word>,
    pub actual: Option<Word>,
    pub error: Option<String>,
    pub mismatch_cycles: usize,
    pub checked_cycles: usize,
}

impl From<&OfficialRunResult> for OfficialSummary {
    fn from(r: &OfficialRunResult) -> Self {
        OfficialSummary {
            passed: r.passed,
            fail_signal: r.fail_signal.clone(),
            fail_cycle: r.fail_cycle,
            expected: r.expected,
            actual: r.actual,
            error: r.error.clone(),
            mismatch_cycles: r.mismatch_cycles,
            checked_cycles: r.checked_cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Passed,
    OfficialFail,
    /// Failed a stored micro-test during smoke testing.
    MicrotestReject,
    /// The formal amplifier found a counterexample.
    FormalReject,
    NotCompiled,
    /// No candidate to evaluate (backend or extraction failure).
    NoCandidate,
    ToolBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub official: Option<OfficialSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailurePoint>,
    /// Micro-test that rejected the candidate, or that formal synthesized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Evaluation {
    pub fn new(verdict: Verdict) -> Self {
        Evaluation {
            verdict,
            official: None,
            failure: None,
            test_id: None,
            note: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Passed
    }

    /// One line for feedback and Stage-B failure summaries.
    pub fn one_line(&self) -> String {
        let at = self
            .failure
            .as_ref()
            .map(|f| format!(" on `{}` at cycle {}", f.signal, f.cycle))
            .unwrap_or_default();
        match self.verdict {
            Verdict::Passed => "passed".into(),
            Verdict::OfficialFail => {
                let o = self.official.as_ref();
                match (o.and_then(|o| o.expected), o.and_then(|o| o.actual)) {
                    (Some(e), Some(a)) => format!("testbench mismatch{at}: expected {e}, got {a}"),
                    _ => match o.and_then(|o| o.error.clone()) {
                        Some(err) => format!("testbench failure{at}: {err}"),
                        None => format!("testbench failure{at}"),
                    },
                }
            }
            Verdict::MicrotestReject => format!("failed stored micro-test{at}"),
            Verdict::FormalReject => format!("property violation{at}"),
            Verdict::NotCompiled => match &self.note {
                Some(n) => format!("does not compile: {n}"),
                None => "does not compile".into(),
            },
            Verdict::NoCandidate => match &self.note {
                Some(n) => format!("no candidate: {n}"),
                None => "no candidate".into(),
            },
            Verdict::ToolBudget => "tool-call budget exhausted".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairOutcome {
    Applied,
    PortListAltered,
    NoModuleInResponse,
    NotCompiled,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub outcome: RepairOutcome,
    pub cone_members: Vec<String>,
    pub cone_lines: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub plan_s: f64,
    pub generate_s: f64,
    pub judge_s: f64,
    pub evaluate_s: f64,
    pub repair_s: f64,
    pub total_s: f64,
}

impl PhaseTimes {
    pub fn close(&mut self) {
        self.total_s =
            self.plan_s + self.generate_s + self.judge_s + self.evaluate_s + self.repair_s;
    }
}

/// Flags a wrapped generator reported alongside its candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterFlags {
    pub native_passed: Option<bool>,
    pub budget_exhausted: Option<bool>,
    pub trace_fired: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    /// 1-based; the Stage-B attempt follows the last Stage-A attempt.
    pub index: usize,
    pub stage: Stage,
    pub candidates: Vec<CandidateRecord>,
    pub chosen: Option<u32>,
    /// Micro-tests replayed per candidate during smoke testing.
    pub smoke_tests: usize,
    pub evaluation: Evaluation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairRecord>,
    /// Digest of the candidate the diagnostics describe.
    pub final_digest: Option<String>,
    /// Store size after this attempt.
    pub store_size: usize,
    pub diagnostics: Option<DiagnosticVector>,
    pub z: Option<f64>,
    pub decision: Decision,
    pub times: PhaseTimes,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter: Option<AdapterFlags>,
}

impl AttemptLog {
    /// Whether the attempt's final candidate passed.
    pub fn passed(&self) -> bool {
        match &self.repair {
            Some(RepairRecord {
                outcome: RepairOutcome::Applied,
                evaluation: Some(e),
                ..
            }) => e.passed(),
            _ => self.evaluation.passed(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Stage-A generation rounds (one per attempt).
    pub coder_rounds: usize,
    pub coder_calls: usize,
    pub repairs: usize,
    pub planner_calls: usize,
    pub stage_b_calls: usize,
    /// Compile, simulate and formal invocations.
    pub tool_calls: usize,
    pub formal_calls: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Native,
    Wrapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub task: String,
    pub mode: Mode,
    pub seed: u64,
    pub r: usize,
    pub tau: f64,
    pub stage_a_backend: String,
    pub stage_b_backend: String,
    pub stage_b_used: bool,
    pub passed: bool,
    pub final_reason: DecisionReason,
    pub attempts: usize,
    pub counters: Counters,
    pub microtests: usize,
    pub stage_a_s: f64,
    pub stage_b_s: f64,
    pub total_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub summary: EpisodeSummary,
    pub attempts: Vec<AttemptLog>,
}

#[derive(Serialize, Deserialize)]
struct Line<T> {
    schema: u32,
    #[serde(rename = "type")]
    kind: String,
    task: String,
    #[serde(flatten)]
    body: T,
}

/// Episode lines carry `task` inside the summary itself.
#[derive(Serialize, Deserialize)]
struct EpisodeLine<T> {
    schema: u32,
    #[serde(rename = "type")]
    kind: String,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {why}")]
    Parse { line: usize, why: String },
    #[error("log has no episode line")]
    Incomplete,
}

impl EpisodeLog {
    pub fn stage_b_attempts(&self) -> usize {
        self.attempts.iter().filter(|a| a.stage == Stage::B).count()
    }

    pub fn escalations(&self) -> usize {
        self.attempts
            .iter()
            .filter(|a| a.decision.kind == DecisionKind::EscalateStageB)
            .count()
    }

    pub fn decisions(&self) -> Vec<Decision> {
        self.attempts.iter().map(|a| a.decision).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for a in &self.attempts {
            let line = Line {
                schema: LOG_SCHEMA,
                kind: "attempt".into(),
                task: self.summary.task.clone(),
                body: a,
            };
            out.push_str(&serde_json::to_string(&line).expect("attempt serializes"));
            out.push('\n');
        }
        let line = EpisodeLine {
            schema: LOG_SCHEMA,
            kind: "episode".into(),
            body: &self.summary,
        };
        out.push_str(&serde_json::to_string(&line).expect("episode serializes"));
        out.push('\n');
        out
    }

    /// Parses every episode in a JSONL stream (several logs may be
    /// concatenated).
    pub fn parse_jsonl(text: &str) -> Result<Vec<EpisodeLog>, LogError> {
        let mut logs = Vec::new();
        let mut pending = Vec::new();
        for (i, l) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let err = |why: String| LogError::Parse { line: i + 1, why };
            let v: serde_json::Value = serde_json::from_str(l).map_err(|e| err(e.to_string()))?;
            match v.get("type").and_then(|t| t.as_str()) {
                Some("attempt") => {
                    let a: Line<AttemptLog> =
                        serde_json::from_value(v).map_err(|e| err(e.to_string()))?;
                    pending.push(a.body);
                }
                Some("episode") => {
                    let s: EpisodeLine<EpisodeSummary> =
                        serde_json::from_value(v).map_err(|e| err(e.to_string()))?;
                    logs.push(EpisodeLog {
                        summary: s.body,
                        attempts: std::mem::take(&mut pending),
                    });
                }
                other => return Err(err(format!("unknown record type {other:?}"))),
            }
        }
        if !pending.is_empty() {
            return Err(LogError::Incomplete);
        }
        Ok(logs)
    }

    /// One labeled row per Stage-A attempt with diagnostics; the label is
    /// whether Stage A eventually produced the accepted design.
    pub fn calibration_rows(&self) -> Vec<LabeledRow> {
        let label = self.summary.passed && !self.summary.stage_b_used;
        self.attempts
            .iter()
            .filter(|a| a.stage == Stage::A)
            .filter_map(|a| a.diagnostics.map(|s| LabeledRow { s, label }))
            .collect()
    }

    /// Per-attempt `(Z, time, passed)` and the Stage-B outcome, for
    /// threshold sweeps.
    pub fn trajectory(&self) -> Trajectory {
        let mut stage_a = Vec::new();
        let mut stage_b = None;
        for a in &self.attempts {
            match a.stage {
                Stage::A => stage_a.push(AttemptRecord {
                    z: a.z.unwrap_or(0.0),
                    time_s: a.times.total_s,
                    passed: a.passed(),
                }),
                Stage::B => {
                    stage_b = Some(StageBRecord {
                        time_s: a.times.total_s,
                        passed: a.passed(),
                    })
                }
            }
        }
        Trajectory {
            task: self.summary.task.clone(),
            r: self.summary.r,
            stage_a,
            stage_b,
        }
    }
}
