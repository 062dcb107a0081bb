//! Bug-injection benchmark: every mutant is run as an episode whose Stage-A
//! coder keeps proposing the mutant, whose repair agent produces the golden
//! design only when the suspect slice reaches the edited lines, and whose
//! Stage-B generator produces the golden design.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inject::{inject, site_count, BugClass, Mutant};
use super::metrics::{latency_stats, nearest_rank, LatencyStats};
use crate::agents::{
    run_episode, run_wrapped, slice_lines, Backend, BackendError, Backends, EpisodeOutput, Request,
    Response, Script, ScriptEntry, ScriptedBackend, Stage, TaskBundle, TaskError, Verdict,
};
use crate::config::RunConfig;
use crate::controller::{AdapterResponse, DecisionKind, ScoreModel, ScriptedAdapter};
use crate::rtl::{parse_module, SourceUnit};

pub const REPORT_SCHEMA: u32 = 1;
pub const CSV_HEADER: &str =
    "config,bug_class,detection_pct,median_iters,mean_time_s,escalation_pct";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchConfig {
    WithMicrotests,
    WithoutMicrotests,
    WrappedExternal,
}

impl BenchConfig {
    pub const ALL: [BenchConfig; 3] = [
        BenchConfig::WithMicrotests,
        BenchConfig::WithoutMicrotests,
        BenchConfig::WrappedExternal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchConfig::WithMicrotests => "with-microtests",
            BenchConfig::WithoutMicrotests => "without-microtests",
            BenchConfig::WrappedExternal => "wrapped-external",
        }
    }

    /// The run configuration this benchmark arm uses on top of `base`.
    pub fn apply(self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        let on = self == BenchConfig::WithMicrotests;
        c.microtests = on;
        c.formal = on;
        c.harness_microtests = on;
        c
    }
}

impl std::str::FromStr for BenchConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        BenchConfig::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown bench config `{s}`"))
    }
}

/// A golden task and one mutant of it.
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub id: String,
    pub task: TaskBundle,
    pub golden: String,
    pub mutant: Mutant,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("{0}: golden.v: {1}")]
    Golden(String, String),
}

/// A task directory with its reference design (`golden.v`).
#[derive(Debug, Clone)]
pub struct GoldenTask {
    pub task: TaskBundle,
    pub golden: String,
}

impl GoldenTask {
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let task = TaskBundle::load(dir)?;
        let golden = std::fs::read_to_string(dir.join("golden.v"))
            .map_err(|e| CorpusError::Golden(task.id.clone(), e.to_string()))?;
        Ok(GoldenTask { task, golden })
    }

    /// Every subdirectory of `root` holding a `golden.v`, sorted by name.
    pub fn load_all(root: &Path) -> Result<Vec<Self>, CorpusError> {
        let mut dirs: Vec<_> = std::fs::read_dir(root)
            .map_err(|e| CorpusError::Golden(root.display().to_string(), e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("golden.v").is_file())
            .collect();
        dirs.sort();
        dirs.iter().map(|d| GoldenTask::load(d)).collect()
    }
}

/// Up to `per_class` distinct mutants per class, taking site 0 of every task
/// in name order, then site 1, and so on.
pub fn build_corpus(
    tasks: &[GoldenTask],
    per_class: usize,
) -> Result<Vec<BenchInstance>, CorpusError> {
    let mut out = Vec::new();
    for class in BugClass::ALL {
        let mut parsed = Vec::new();
        for t in tasks {
            let src = SourceUnit::new(format!("{}.v", t.task.id), t.golden.as_str());
            let m = parse_module(&src)
                .map_err(|e| CorpusError::Golden(t.task.id.clone(), e.to_string()))?;
            let n = site_count(&src, &m, class);
            parsed.push((t, src, m, n));
        }
        let rounds = parsed.iter().map(|p| p.3).max().unwrap_or(0);
        let mut taken: Vec<BenchInstance> = Vec::new();
        'outer: for seed in 0..rounds {
            for (t, src, m, n) in &parsed {
                if taken.len() >= per_class {
                    break 'outer;
                }
                if seed >= *n {
                    continue;
                }
                let Ok(mu) = inject(src, m, class, seed as u64) else {
                    continue;
                };
                if taken
                    .iter()
                    .any(|b| b.task.id == t.task.id && b.mutant.source.text() == mu.source.text())
                {
                    continue;
                }
                taken.push(BenchInstance {
                    id: format!("{}/{}/{}", class, t.task.id, seed),
                    task: t.task.clone(),
                    golden: t.golden.clone(),
                    mutant: mu,
                });
            }
        }
        out.extend(taken);
    }
    Ok(out)
}

/// Repair agent that fixes the mutant iff the slice in its prompt lists one
/// of the mutant's site lines.
pub struct OracleRepair {
    pub golden: String,
    pub mutant: String,
    pub site_lines: (usize, usize),
}

impl Backend for OracleRepair {
    fn identity(&self) -> String {
        "oracle-repair".into()
    }

    fn complete(&self, req: &Request) -> Result<Response, BackendError> {
        let (lo, hi) = self.site_lines;
        let hit = slice_lines(&req.prompt)
            .iter()
            .any(|l| (lo..=hi).contains(l));
        let body = if hit { &self.golden } else { &self.mutant };
        Ok(Response {
            text: format!("```verilog\n{body}```\n"),
            latency_s: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance: String,
    pub config: BenchConfig,
    pub bug_class: BugClass,
    /// Some test (official or micro) failed on a Stage-A candidate.
    pub detected: bool,
    /// Attempts until an accepted design equal to the golden one, or `r + 1`.
    pub iterations: usize,
    pub recovered: bool,
    pub escalated: bool,
    pub passed: bool,
    pub time_s: f64,
    pub stage_a_s: f64,
    pub stage_b_s: f64,
    pub tool_calls: usize,
    pub coder_rounds: usize,
    pub stage_b_attempts: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub config: BenchConfig,
    /// A class name, or `all`.
    pub bug_class: String,
    pub instances: usize,
    pub detection_pct: f64,
    pub median_iters: f64,
    pub mean_time_s: f64,
    pub escalation_pct: f64,
    /// Share of episodes ending in an accepted design equal to the golden one.
    pub pass_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub config: BenchConfig,
    pub stage: String,
    pub stats: LatencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub rows: Vec<BenchRow>,
    pub latency: Vec<StageLatency>,
    pub instances: Vec<InstanceResult>,
}

impl BenchReport {
    pub fn row(&self, config: BenchConfig, class: &str) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.config == config && r.bug_class == class)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.2},{:.1},{:.3},{:.2}\n",
                r.config.name(),
                r.bug_class,
                r.detection_pct,
                r.median_iters,
                r.mean_time_s,
                r.escalation_pct
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn same_design(a: &str, b: &str) -> bool {
    a.trim() == b.trim()
}

fn fenced(src: &str) -> String {
    format!("```verilog\n{src}```\n")
}

const BENCH_PLAN: &str =
    "PLAN:\nImplement the specification directly.\nINVARIANTS:\n- outputs are known after reset\n";

/// Runs one instance under one arm.
pub fn run_instance(
    inst: &BenchInstance,
    config: BenchConfig,
    base: &RunConfig,
    model: &ScoreModel,
) -> InstanceResult {
    let cfg = config.apply(base);
    let mutant = inst.mutant.source.text().to_string();
    let stage_b = ScriptedBackend::new(
        "golden",
        Script {
            stage_b: vec![ScriptEntry::text(fenced(&inst.golden))],
            ..Script::default()
        },
    );
    let out: Result<EpisodeOutput, String> = match config {
        BenchConfig::WrappedExternal => {
            let mut adapter = ScriptedAdapter::new(vec![AdapterResponse {
                source: mutant.clone(),
                ..AdapterResponse::default()
            }]);
            run_wrapped(&inst.task, &cfg, model, &mut adapter, &stage_b).map_err(|e| e.to_string())
        }
        _ => {
            let gen = ScriptedBackend::new(
                "mutant",
                Script {
                    planner: vec![ScriptEntry::text(BENCH_PLAN)],
                    coder: vec![ScriptEntry::text(fenced(&mutant))],
                    ..Script::default()
                },
            );
            let repair = OracleRepair {
                golden: inst.golden.clone(),
                mutant: mutant.clone(),
                site_lines: inst.mutant.site_lines,
            };
            let b = Backends {
                planner: &gen,
                coder: &gen,
                reflexion: &repair,
                stage_b: &stage_b,
            };
            Ok(run_episode(&inst.task, &cfg, model, &b))
        }
    };
    let mut res = InstanceResult {
        instance: inst.id.clone(),
        config,
        bug_class: inst.mutant.spec.class,
        detected: false,
        iterations: cfg.r + 1,
        recovered: false,
        escalated: false,
        passed: false,
        time_s: 0.0,
        stage_a_s: 0.0,
        stage_b_s: 0.0,
        tool_calls: 0,
        coder_rounds: 0,
        stage_b_attempts: 0,
        error: None,
    };
    let out = match out {
        Ok(o) => o,
        Err(e) => {
            res.error = Some(e);
            return res;
        }
    };
    let log = &out.log;
    res.detected = log
        .attempts
        .iter()
        .filter(|a| a.stage == Stage::A)
        .any(|a| {
            let failing = matches!(
                a.evaluation.verdict,
                Verdict::OfficialFail | Verdict::MicrotestReject | Verdict::FormalReject
            );
            let smoke = a
                .chosen
                .and_then(|id| a.candidates.iter().find(|c| c.id == id))
                .is_some_and(|c| c.compiled && c.smoke_fraction < 1.0);
            failing || smoke
        });
    for (a, src) in log.attempts.iter().zip(&out.attempt_sources) {
        if a.decision.kind == DecisionKind::Accept
            && src.as_deref().is_some_and(|s| same_design(s, &inst.golden))
        {
            res.iterations = a.index;
            res.recovered = true;
            break;
        }
    }
    res.escalated = log.summary.stage_b_used;
    res.stage_b_attempts = log.stage_b_attempts();
    res.passed = log.summary.passed;
    res.time_s = log.summary.total_s;
    res.stage_a_s = log.summary.stage_a_s;
    res.stage_b_s = log.summary.stage_b_s;
    res.tool_calls = log.summary.counters.tool_calls;
    res.coder_rounds = log.summary.counters.coder_rounds;
    res
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

fn row(config: BenchConfig, class: String, rs: &[&InstanceResult]) -> BenchRow {
    let mut iters: Vec<f64> = rs.iter().map(|r| r.iterations as f64).collect();
    iters.sort_by(f64::total_cmp);
    let n = rs.len();
    BenchRow {
        config,
        bug_class: class,
        instances: n,
        detection_pct: pct(rs.iter().filter(|r| r.detected).count(), n),
        median_iters: if iters.is_empty() {
            0.0
        } else {
            nearest_rank(&iters, 50)
        },
        mean_time_s: if n == 0 {
            0.0
        } else {
            rs.iter().map(|r| r.time_s).sum::<f64>() / n as f64
        },
        escalation_pct: pct(rs.iter().filter(|r| r.escalated).count(), n),
        pass_at_1: if n == 0 {
            0.0
        } else {
            rs.iter().filter(|r| r.recovered).count() as f64 / n as f64
        },
    }
}

/// Every instance under every arm, `jobs` at a time. Results are ordered by
/// instance id, then arm.
pub fn run_bug_benchmark(
    corpus: &[BenchInstance],
    configs: &[BenchConfig],
    base: &RunConfig,
    model: &ScoreModel,
    jobs: usize,
) -> BenchReport {
    let mut pairs: Vec<(&BenchInstance, BenchConfig)> = corpus
        .iter()
        .flat_map(|i| configs.iter().map(move |c| (i, *c)))
        .collect();
    pairs.sort_by(|a, b| (&a.0.id, a.1).cmp(&(&b.0.id, b.1)));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let instances: Vec<InstanceResult> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(i, c)| run_instance(i, *c, base, model))
            .collect()
    });

    let mut rows = Vec::new();
    let mut latency = Vec::new();
    for &c in configs {
        let mine: Vec<&InstanceResult> = instances.iter().filter(|r| r.config == c).collect();
        for class in BugClass::ALL {
            let rs: Vec<&InstanceResult> = mine
                .iter()
                .copied()
                .filter(|r| r.bug_class == class)
                .collect();
            if !rs.is_empty() {
                rows.push(row(c, class.name().to_string(), &rs));
            }
        }
        rows.push(row(c, "all".into(), &mine));
        let stage_a: Vec<f64> = mine.iter().map(|r| r.stage_a_s).collect();
        let stage_b: Vec<f64> = mine
            .iter()
            .filter(|r| r.escalated)
            .map(|r| r.stage_b_s)
            .collect();
        let total: Vec<f64> = mine.iter().map(|r| r.time_s).collect();
        for (stage, xs) in [("stage-a", stage_a), ("stage-b", stage_b), ("total", total)] {
            if let Ok(stats) = latency_stats(&xs) {
                latency.push(StageLatency {
                    config: c,
                    stage: stage.into(),
                    stats,
                });
            }
        }
    }
    BenchReport {
        schema: REPORT_SCHEMA,
        rows,
        latency,
        instances,
    }
}
