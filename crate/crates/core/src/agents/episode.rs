//! One episode: plan, generate, judge, evaluate and repair for up to `r`
//! Stage-A attempts, then at most one Stage-B call.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::backend::{Backend, Request, Role, TranscriptEntry};
use super::clock::Clock;
use super::log::*;
use super::prompts::*;
use super::task::TaskBundle;
use crate::config::RunConfig;
use crate::controller::{
    decide, AdapterProtocolError, AdapterRequest, AdapterResponse, Decision, DecisionKind,
    DecisionReason, ScoreModel, StageAAdapter, ADAPTER_SCHEMA,
};
use crate::diagnostics::{
    budget_signal, lint_signal, rank_candidates, smoke_signal, CandidateDiag, DiagnosticVector,
    FailurePoint, TraceHistory,
};
use crate::formal::amplify_with_tools;
use crate::microtests::{
    derive_u0, from_harness_failure, MicroTest, MicroTestStore, Provenance, ReplayOutcome,
};
use crate::rtl::{backward_cone, build_signal_graph, parse_module, RtlModule, SourceUnit};
use crate::tools::{compile, lint, run_official, run_testbench, Job, OfficialRunResult};

/// Backends per role; they may all be the same object.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub planner: &'a dyn Backend,
    pub coder: &'a dyn Backend,
    pub reflexion: &'a dyn Backend,
    pub stage_b: &'a dyn Backend,
}

impl<'a> Backends<'a> {
    pub fn uniform(b: &'a dyn Backend) -> Self {
        Backends {
            planner: b,
            coder: b,
            reflexion: b,
            stage_b: b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub log: EpisodeLog,
    pub store: MicroTestStore,
    /// Source of the accepted design.
    pub final_source: Option<String>,
    /// Source the diagnostics described, per attempt (Stage B included).
    pub attempt_sources: Vec<Option<String>>,
    pub transcript: Vec<TranscriptEntry>,
}

impl EpisodeOutput {
    pub fn passed(&self) -> bool {
        self.log.summary.passed
    }

    /// Writes `<task>.jsonl`, `<task>.transcript.jsonl`,
    /// `<task>/microtests.json` and, on success, `<task>/final.v` under `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        let task = &self.log.summary.task;
        let sub = dir.join(task);
        std::fs::create_dir_all(&sub)?;
        let mut written = Vec::new();
        let log = dir.join(format!("{task}.jsonl"));
        std::fs::write(&log, self.log.to_jsonl())?;
        written.push(log);
        let tr = dir.join(format!("{task}.transcript.jsonl"));
        let mut text = String::new();
        for e in &self.transcript {
            text.push_str(&serde_json::to_string(e).expect("transcript serializes"));
            text.push('\n');
        }
        std::fs::write(&tr, text)?;
        written.push(tr);
        let store = sub.join("microtests.json");
        self.store.save(&store)?;
        written.push(store);
        if let Some(src) = &self.final_source {
            let f = sub.join("final.v");
            std::fs::write(&f, src)?;
            written.push(f);
        }
        Ok(written)
    }
}

pub fn run_episode(
    task: &TaskBundle,
    cfg: &RunConfig,
    model: &ScoreModel,
    backends: &Backends<'_>,
) -> EpisodeOutput {
    run_episode_with_store(task, cfg, model, backends, MicroTestStore::new(&task.id))
}

/// Like [`run_episode`], starting from an existing store.
pub fn run_episode_with_store(
    task: &TaskBundle,
    cfg: &RunConfig,
    model: &ScoreModel,
    backends: &Backends<'_>,
    store: MicroTestStore,
) -> EpisodeOutput {
    let mut r = Runner::new(
        task,
        cfg,
        model,
        store,
        backends.stage_b,
        Mode::Native,
        backends.coder.identity(),
    );
    let mut gen = Generator::Native {
        backends,
        plans: Vec::new(),
    };
    r.run(&mut gen)
        .expect("native generation has no protocol errors")
}

/// Drives a black-box Stage-A generator through the same judge, diagnostics
/// and escalation path. Repair and formal amplification are not applied to
/// wrapped candidates.
pub fn run_wrapped(
    task: &TaskBundle,
    cfg: &RunConfig,
    model: &ScoreModel,
    adapter: &mut dyn StageAAdapter,
    stage_b: &dyn Backend,
) -> Result<EpisodeOutput, AdapterProtocolError> {
    let mut r = Runner::new(
        task,
        cfg,
        model,
        MicroTestStore::new(&task.id),
        stage_b,
        Mode::Wrapped,
        adapter.identity(),
    );
    let mut gen = Generator::Wrapped { adapter };
    r.run(&mut gen)
}

enum Generator<'a, 'b> {
    Native {
        backends: &'a Backends<'a>,
        plans: Vec<Plan>,
    },
    Wrapped {
        adapter: &'b mut dyn StageAAdapter,
    },
}

struct Judged {
    rec: CandidateRecord,
    text: Option<String>,
    src: Option<SourceUnit>,
    module: Option<RtlModule>,
    smoke: Vec<ReplayOutcome>,
    virtual_s: f64,
}

#[derive(Clone, Copy)]
struct EvalMode {
    reject_on_tests: bool,
    formal: bool,
    harness: bool,
}

struct Runner<'a> {
    task: &'a TaskBundle,
    cfg: &'a RunConfig,
    model: &'a ScoreModel,
    stage_b: &'a dyn Backend,
    clock: Clock,
    store: MicroTestStore,
    counters: Counters,
    history: TraceHistory,
    transcript: Vec<TranscriptEntry>,
    attempts: Vec<AttemptLog>,
    sources: Vec<Option<String>>,
    notes: Vec<String>,
    mode: Mode,
    stage_a_id: String,
}

fn digest(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..6])
}

fn call_seed(base: u64, role: Role, attempt: usize, i: usize) -> u64 {
    let r = role as u64 + 1;
    base ^ (r << 56) ^ ((attempt as u64) << 32) ^ i as u64
}

/// Sum over chunks of `b` of the slowest item in each chunk.
fn batched(costs: &[f64], b: usize) -> f64 {
    costs
        .chunks(b.max(1))
        .map(|c| c.iter().cloned().fold(0.0, f64::max))
        .sum()
}

fn judge_one(
    cfg: &RunConfig,
    task: &TaskBundle,
    tests: &[MicroTest],
    job: Job,
    id: u32,
    plan: usize,
    text: Result<String, String>,
) -> Judged {
    let c = &cfg.costs;
    let mut rec = CandidateRecord {
        id,
        plan,
        digest: String::new(),
        compiled: false,
        lint_count: 0,
        smoke_fraction: 0.0,
        error: None,
    };
    let text = match text {
        Ok(t) => t,
        Err(e) => {
            rec.error = Some(e);
            return Judged {
                rec,
                text: None,
                src: None,
                module: None,
                smoke: Vec::new(),
                virtual_s: 0.0,
            };
        }
    };
    rec.digest = digest(&text);
    let src = SourceUnit::new(format!("candidate{id}.v"), text.as_str());
    let report = compile(&src, &cfg.tools, &job);
    let mut virtual_s = c.compile;
    let mut smoke = Vec::new();
    rec.compiled = report.built;
    if !report.built {
        rec.error = report.first_error().map(|m| m.text.clone());
    }
    let module = if report.built { report.module } else { None };
    if let Some(m) = &module {
        rec.lint_count = lint(&src, m, &cfg.tools, &job).unique_count;
        virtual_s += c.lint;
        if cfg.microtests {
            smoke = tests.iter().map(|t| t.replay(m, cfg.w_smoke)).collect();
            let bits: Vec<bool> = smoke.iter().flat_map(|o| o.bits.iter().copied()).collect();
            rec.smoke_fraction = smoke_signal(&bits).unwrap_or(0.0);
            virtual_s += c.smoke_test * tests.len().max(1) as f64;
        } else {
            let res = run_testbench(m, &task.testbench, cfg.dt_wave, Some(cfg.w_smoke));
            rec.smoke_fraction = res.match_fraction().unwrap_or(0.0);
            virtual_s += c.smoke_test;
        }
    }
    Judged {
        rec,
        text: Some(text),
        src: Some(src),
        module,
        smoke,
        virtual_s,
    }
}

impl<'a> Runner<'a> {
    fn new(
        task: &'a TaskBundle,
        cfg: &'a RunConfig,
        model: &'a ScoreModel,
        mut store: MicroTestStore,
        stage_b: &'a dyn Backend,
        mode: Mode,
        stage_a_id: String,
    ) -> Self {
        if cfg.microtests {
            store.insert(derive_u0(&task.header_module));
        }
        Runner {
            task,
            cfg,
            model,
            stage_b,
            clock: Clock::new(cfg.clock),
            store,
            counters: Counters::default(),
            history: TraceHistory::default(),
            transcript: Vec::new(),
            attempts: Vec::new(),
            sources: Vec::new(),
            notes: Vec::new(),
            mode,
            stage_a_id,
        }
    }

    fn tools_left(&self) -> usize {
        self.cfg.max_tool_calls.map_or(usize::MAX, |cap| {
            cap.saturating_sub(self.counters.tool_calls)
        })
    }

    fn tools_exhausted(&self) -> bool {
        self.tools_left() == 0
    }

    fn job(&self, tag: String) -> Job {
        Job::new(self.task.id.clone(), tag)
    }

    fn call(
        &mut self,
        backend: &dyn Backend,
        req: Request,
        attempt: usize,
        virtual_s: f64,
    ) -> (Result<String, String>, f64) {
        let (res, secs) = self
            .clock
            .measure_reported(virtual_s, || match backend.complete(&req) {
                Ok(r) => (Ok(r.text), r.latency_s),
                Err(e) => (Err(e.to_string()), None),
            });
        self.transcript.push(TranscriptEntry {
            attempt,
            backend: backend.identity(),
            request: req,
            response: res.as_ref().ok().cloned(),
            error: res.as_ref().err().cloned(),
        });
        (res, secs)
    }

    /// Judges candidates in concurrent chunks of `B`.
    fn judge(
        &mut self,
        attempt: usize,
        texts: Vec<(usize, Result<String, String>)>,
    ) -> (Vec<Judged>, f64) {
        let b = self.cfg.batch_width();
        let (cfg, task) = (self.cfg, self.task);
        let tests: &[MicroTest] = &self.store.tests;
        // Each candidate may need compile, lint and smoke; candidates that
        // would not fit in the remaining tool budget are not judged.
        let mut left = self.tools_left();
        let items: Vec<(u32, usize, Result<String, String>, Job)> = texts
            .into_iter()
            .enumerate()
            .map(|(i, (plan, t))| {
                let t = match t {
                    Ok(_) if left < 3 => Err("tool-call budget exhausted".to_string()),
                    Ok(s) => {
                        left -= 3;
                        Ok(s)
                    }
                    Err(e) => Err(e),
                };
                (
                    i as u32,
                    plan,
                    t,
                    Job::new(task.id.clone(), format!("a{attempt}-c{i}")),
                )
            })
            .collect();
        let (judged, wall) = self.clock.measure(0.0, || {
            let mut out = Vec::with_capacity(items.len());
            let mut items = items.into_iter().peekable();
            while items.peek().is_some() {
                let chunk: Vec<_> = items.by_ref().take(b).collect();
                let done: Vec<Judged> = std::thread::scope(|s| {
                    let hs: Vec<_> = chunk
                        .into_iter()
                        .map(|(id, plan, t, job)| {
                            s.spawn(move || judge_one(cfg, task, tests, job, id, plan, t))
                        })
                        .collect();
                    hs.into_iter()
                        .map(|h| h.join().expect("judge worker"))
                        .collect()
                });
                out.extend(done);
            }
            out
        });
        for j in &judged {
            if j.text.is_some() {
                self.counters.tool_calls += if j.module.is_some() { 3 } else { 1 };
            }
        }
        let secs = match self.cfg.clock {
            crate::config::ClockMode::Wall => wall,
            crate::config::ClockMode::Virtual => {
                batched(&judged.iter().map(|j| j.virtual_s).collect::<Vec<_>>(), b)
            }
        };
        (judged, secs)
    }

    fn evaluate(
        &mut self,
        attempt: usize,
        j: &Judged,
        mode: EvalMode,
    ) -> (Evaluation, f64, Option<OfficialRunResult>) {
        let cfg = self.cfg;
        let costs = &cfg.costs;
        let (Some(m), Some(src)) = (&j.module, &j.src) else {
            let verdict = if j.text.is_some() {
                Verdict::NotCompiled
            } else {
                Verdict::NoCandidate
            };
            let mut e = Evaluation::new(verdict);
            e.note = j.rec.error.clone();
            return (e, 0.0, None);
        };
        if mode.reject_on_tests {
            if let Some(o) = j
                .smoke
                .iter()
                .find(|o| o.provenance != Provenance::U0Derived && !o.passed())
            {
                let mut e = Evaluation::new(Verdict::MicrotestReject);
                e.failure = o.first_failure.clone();
                e.test_id = Some(o.id.clone());
                return (e, 0.0, None);
            }
        }
        let mut secs = 0.0;
        let mut note = None;
        if mode.formal {
            if self.tools_exhausted() {
                return (Evaluation::new(Verdict::ToolBudget), secs, None);
            }
            self.counters.tool_calls += 1;
            self.counters.formal_calls += 1;
            let job = self.job(format!("a{attempt}-formal{}", self.counters.formal_calls));
            let header = &self.task.header_module;
            let (res, s) = self.clock.measure(costs.formal, || {
                amplify_with_tools(
                    m,
                    src,
                    Some(header),
                    &self.task.props,
                    &mut self.store,
                    self.cfg.d,
                    self.cfg.seed,
                    &self.cfg.tools,
                    &job,
                )
            });
            secs += s;
            match res {
                Ok(out) => {
                    if let Some(id) = out.test_id {
                        let mut e = Evaluation::new(Verdict::FormalReject);
                        e.failure = self
                            .store
                            .tests
                            .iter()
                            .find(|t| t.id == id)
                            .and_then(|t| t.checks.first())
                            .map(|c| FailurePoint::new(c.signal.clone(), c.cycle));
                        e.test_id = Some(id);
                        return (e, secs, None);
                    }
                }
                Err(err) => note = Some(format!("formal check skipped: {err}")),
            }
        }
        if self.tools_exhausted() {
            return (Evaluation::new(Verdict::ToolBudget), secs, None);
        }
        self.counters.tool_calls += 1;
        let job = self.job(format!("a{attempt}-official{}", self.counters.tool_calls));
        let (res, s) = self.clock.measure(costs.official_sim, || {
            run_official(src, &self.task.tb, &self.cfg.tools, &job, self.cfg.dt_wave)
        });
        secs += s;
        let res = match res {
            Ok(r) => r,
            Err(err) => {
                let mut e = Evaluation::new(Verdict::OfficialFail);
                e.note = Some(err.to_string());
                return (e, secs, None);
            }
        };
        let mut e = Evaluation::new(if res.passed {
            Verdict::Passed
        } else {
            Verdict::OfficialFail
        });
        e.official = Some(OfficialSummary::from(&res));
        e.note = note;
        if !res.passed {
            if let (Some(sig), Some(c)) = (&res.fail_signal, res.fail_cycle) {
                e.failure = Some(FailurePoint::new(sig.clone(), c));
            }
            if mode.harness {
                if let Some(t) =
                    from_harness_failure(&self.task.header_module, &self.task.testbench, &res)
                {
                    e.test_id = Some(t.id.clone());
                    self.store.insert(t);
                }
            }
        }
        (e, secs, Some(res))
    }

    fn native_mode(&self) -> EvalMode {
        EvalMode {
            reject_on_tests: self.cfg.microtests,
            formal: self.cfg.microtests && self.cfg.formal,
            harness: self.cfg.microtests && self.cfg.harness_microtests,
        }
    }

    /// One reflexion round on a failing candidate.
    fn repair(
        &mut self,
        attempt: usize,
        backend: &dyn Backend,
        plan: &Plan,
        j: &Judged,
        eval: &Evaluation,
        official: Option<&OfficialRunResult>,
    ) -> (
        RepairRecord,
        Option<(Judged, Evaluation)>,
        Option<String>,
        f64,
    ) {
        let cone = match (&j.module, &j.src, &eval.failure) {
            (Some(m), Some(src), Some(fp)) => backward_cone(
                &build_signal_graph(m),
                src,
                &fp.signal,
                fp.cycle,
                self.cfg.d_max,
                self.cfg.l_max,
            )
            .ok(),
            _ => None,
        };
        let slice = cone.as_ref().map(format_slice);
        let window = official.and_then(|o| {
            o.waveform_window
                .as_ref()
                .map(|w| format_window(w, o.window_start))
        });
        let mut rec = RepairRecord {
            outcome: RepairOutcome::BackendError,
            cone_members: cone.as_ref().map(|c| c.members.clone()).unwrap_or_default(),
            cone_lines: cone
                .as_ref()
                .map(|c| c.slice.iter().map(|l| l.line).collect())
                .unwrap_or_default(),
            digest: None,
            evaluation: None,
            error: None,
        };
        let failure = eval.one_line();
        let prompt = reflexion_prompt(
            self.task,
            plan,
            &RepairContext {
                candidate: j.text.as_deref().unwrap_or_default(),
                failure: &failure,
                window,
                slice: slice.clone(),
            },
        );
        self.counters.repairs += 1;
        let req = Request {
            role: Role::Reflexion,
            prompt,
            temperature: plan.temperature,
            seed: call_seed(self.cfg.seed, Role::Reflexion, attempt, plan.id),
        };
        let (reply, mut secs) = self.call(backend, req, attempt, self.cfg.costs.reflexion_call);
        let text = match reply {
            Ok(t) => t,
            Err(e) => {
                rec.error = Some(e);
                return (rec, None, slice, secs);
            }
        };
        let source = match extract_module(&text) {
            Ok(s) => s,
            Err(e) => {
                rec.outcome = RepairOutcome::NoModuleInResponse;
                rec.error = Some(e.to_string());
                return (rec, None, slice, secs);
            }
        };
        rec.digest = Some(digest(&source));
        if let Ok(m) = parse_module(&SourceUnit::new("repair.v", source.as_str())) {
            if m.port_signature() != self.task.header_module.port_signature() {
                rec.outcome = RepairOutcome::PortListAltered;
                return (rec, None, slice, secs);
            }
        }
        if self.tools_left() < 3 {
            rec.error = Some("tool-call budget exhausted".into());
            return (rec, None, slice, secs);
        }
        let (mut judged, s) = self.judge(attempt, vec![(j.rec.plan, Ok(source))]);
        secs += s;
        let mut rj = judged.pop().expect("one candidate");
        rj.rec.id = j.rec.id;
        if !rj.rec.compiled || rj.module.is_none() {
            rec.outcome = RepairOutcome::NotCompiled;
            rec.error = rj.rec.error.clone();
            return (rec, None, slice, secs);
        }
        let mode = self.native_mode();
        let (e, s, _) = self.evaluate(attempt, &rj, mode);
        secs += s;
        rec.outcome = RepairOutcome::Applied;
        rec.evaluation = Some(e.clone());
        (rec, Some((rj, e)), slice, secs)
    }

    fn plan(&mut self, backend: &dyn Backend) -> (Vec<Plan>, f64) {
        let mut plans = Vec::with_capacity(self.cfg.n);
        let mut costs = Vec::new();
        for i in 0..self.cfg.n {
            let temperature = self.cfg.temperature(i);
            let seed = call_seed(self.cfg.seed, Role::Planner, 0, i);
            let req = Request {
                role: Role::Planner,
                prompt: planner_prompt(self.task, i, self.cfg.n),
                temperature,
                seed,
            };
            self.counters.planner_calls += 1;
            let (reply, s) = self.call(backend, req, 1, self.cfg.costs.plan_call);
            costs.push(s);
            let (strategy, invariants) = match reply.map_err(|e| e.to_string()).and_then(|t| {
                parse_plan(&t).map_err(|e| format!("{e}; raw reply used as strategy: {}", t.trim()))
            }) {
                Ok(p) => p,
                Err(e) => {
                    self.notes.push(format!("plan {i}: {e}"));
                    (
                        String::from("implement the specification directly"),
                        Vec::new(),
                    )
                }
            };
            plans.push(Plan {
                id: i,
                strategy,
                invariants,
                temperature,
                seed,
            });
        }
        (plans, batched(&costs, self.cfg.batch_width()))
    }

    fn diagnostics(&mut self, fin: &Judged, eval: &Evaluation, attempt: usize) -> DiagnosticVector {
        let compiled = fin.module.is_some();
        let s_trace = self
            .history
            .observe(eval.failure.as_ref(), self.cfg.dt_wave);
        DiagnosticVector {
            s_comp: if compiled { 1.0 } else { 0.0 },
            s_lint: if compiled {
                lint_signal(fin.rec.lint_count, self.cfg.l_lint)
            } else {
                0.0
            },
            s_smoke: if compiled {
                fin.rec.smoke_fraction
            } else {
                0.0
            },
            s_trace,
            s_budget: budget_signal(attempt, self.cfg.r),
        }
    }

    fn run(&mut self, gen: &mut Generator<'_, '_>) -> Result<EpisodeOutput, AdapterProtocolError> {
        let mut feedback: Option<String> = None;
        let mut last_slice: Option<String> = None;
        let mut final_source = None;
        let mut outcome = Decision::new(DecisionKind::Terminate, DecisionReason::BudgetExhausted);
        let mut stage_a_s = 0.0;
        for k in 1..=self.cfg.r {
            let mut times = PhaseTimes::default();
            self.counters.coder_rounds += 1;
            let mut adapter_flags = None;
            let mut adapter_resp: Option<AdapterResponse> = None;
            let texts: Vec<(usize, Result<String, String>)> = match gen {
                Generator::Native { backends, plans } => {
                    if plans.is_empty() {
                        let (p, s) = self.plan(backends.planner);
                        *plans = p;
                        times.plan_s = s;
                    }
                    let mut texts = Vec::new();
                    let mut costs = Vec::new();
                    for plan in plans.iter() {
                        for c in 0..self.cfg.m {
                            let req = Request {
                                role: Role::Coder,
                                prompt: coder_prompt(self.task, plan, feedback.as_deref(), c),
                                temperature: plan.temperature,
                                seed: call_seed(
                                    self.cfg.seed,
                                    Role::Coder,
                                    k,
                                    plan.id * self.cfg.m + c,
                                ),
                            };
                            self.counters.coder_calls += 1;
                            let (reply, s) =
                                self.call(backends.coder, req, k, self.cfg.costs.coder_call);
                            costs.push(s);
                            let src =
                                reply.and_then(|t| extract_module(&t).map_err(|e| e.to_string()));
                            texts.push((plan.id, src));
                        }
                    }
                    times.generate_s = batched(&costs, self.cfg.batch_width());
                    texts
                }
                Generator::Wrapped { adapter } => {
                    let req = AdapterRequest {
                        schema: ADAPTER_SCHEMA,
                        task_id: self.task.id.clone(),
                        spec: self.task.spec.clone(),
                        header: self.task.header.text().to_string(),
                        attempt: k,
                        feedback: feedback.clone(),
                    };
                    self.counters.coder_calls += 1;
                    let (resp, s) = self.clock.measure_reported(self.cfg.costs.coder_call, || {
                        match adapter.produce(&req) {
                            Ok(r) => {
                                let e = r.elapsed_s;
                                (Ok(r), e)
                            }
                            Err(e) => (Err(e), None),
                        }
                    });
                    let resp = resp?;
                    times.generate_s = s;
                    adapter_flags = Some(AdapterFlags {
                        native_passed: resp.passed,
                        budget_exhausted: resp.budget_exhausted,
                        trace_fired: resp.trace_fired,
                    });
                    let src = extract_module(&resp.source).map_err(|e| e.to_string());
                    adapter_resp = Some(resp);
                    vec![(0, src)]
                }
            };

            if self.tools_left() < 3 {
                let d = Decision::new(DecisionKind::Terminate, DecisionReason::ToolBudgetExhausted);
                times.close();
                stage_a_s += times.total_s;
                self.push_attempt(
                    k,
                    Stage::A,
                    Vec::new(),
                    None,
                    Evaluation::new(Verdict::ToolBudget),
                    None,
                    None,
                    None,
                    None,
                    d,
                    times,
                    adapter_flags,
                );
                outcome = d;
                break;
            }
            let (mut judged, s) = self.judge(k, texts);
            times.judge_s = s;
            let smoke_tests = if self.cfg.microtests {
                self.store.len()
            } else {
                0
            };
            let diags: Vec<CandidateDiag> = judged
                .iter()
                .map(|j| CandidateDiag {
                    id: j.rec.id,
                    s_comp: if j.module.is_some() { 1.0 } else { 0.0 },
                    smoke_fraction: j.rec.smoke_fraction,
                    lint_count: j.rec.lint_count,
                })
                .collect();
            let best = rank_candidates(&diags)[0].id;
            let records: Vec<CandidateRecord> = judged.iter().map(|j| j.rec.clone()).collect();
            let chosen_idx = judged
                .iter()
                .position(|j| j.rec.id == best)
                .expect("ranked id exists");
            let chosen = judged.swap_remove(chosen_idx);

            let mode = EvalMode {
                formal: self.mode == Mode::Native && self.native_mode().formal,
                ..self.native_mode()
            };
            let reported = adapter_resp.as_ref().and_then(|r| r.passed);
            let (eval, s, official) = match reported {
                Some(p) if chosen.module.is_some() => {
                    let mut e = Evaluation::new(if p {
                        Verdict::Passed
                    } else {
                        Verdict::OfficialFail
                    });
                    e.note = Some("verdict reported by the wrapped generator".into());
                    (e, 0.0, None)
                }
                _ => self.evaluate(k, &chosen, mode),
            };
            times.evaluate_s = s;

            let mut repair = None;
            let mut fin = (chosen, eval.clone());
            let native = match gen {
                Generator::Native { backends, plans } => Some((backends.reflexion, plans.clone())),
                Generator::Wrapped { .. } => None,
            };
            if let Some((reflexion, plans)) = native {
                let repairable = matches!(
                    eval.verdict,
                    Verdict::OfficialFail | Verdict::MicrotestReject | Verdict::FormalReject
                );
                if self.cfg.repair && repairable {
                    let plan = plans
                        .get(fin.0.rec.plan)
                        .cloned()
                        .expect("candidate plan exists");
                    let (rec, repaired, slice, s) =
                        self.repair(k, reflexion, &plan, &fin.0, &eval, official.as_ref());
                    times.repair_s = s;
                    if slice.is_some() {
                        last_slice = slice;
                    }
                    if let Some(r) = repaired {
                        fin = r;
                    }
                    repair = Some(rec);
                }
            }
            let (fin_j, fin_eval) = fin;
            let passed = fin_eval.passed();
            let mut s_vec = self.diagnostics(&fin_j, &fin_eval, k);
            let mut attempts_used = k;
            if let Some(r) = &adapter_resp {
                if let Some(t) = r.trace_override() {
                    s_vec.s_trace = t;
                }
                s_vec.s_budget = r.budget_signal(k, self.cfg.r);
                if r.budget_exhausted == Some(true) {
                    attempts_used = self.cfg.r;
                }
            }
            let z = self.model.z(&s_vec);
            let mut decision = decide(z, self.cfg.tau, attempts_used, self.cfg.r, passed, false);
            if !passed && self.tools_exhausted() {
                decision =
                    Decision::new(DecisionKind::Terminate, DecisionReason::ToolBudgetExhausted);
            }
            times.close();
            stage_a_s += times.total_s;

            let mut summary = format!(
                "attempt {k}: candidate {} {}",
                fin_j.rec.id,
                eval.one_line()
            );
            if let Some(r) = &repair {
                summary.push_str(&format!("; repair {:?}", r.outcome).to_lowercase());
                if let Some(e) = &r.evaluation {
                    summary.push_str(&format!(" ({})", e.one_line()));
                }
            }
            let mut fb = summary.clone();
            if let Some(sl) = &last_slice {
                fb.push('\n');
                fb.push_str(sl);
            }
            feedback = Some(fb);
            if passed {
                final_source = fin_j.text.clone();
            }
            self.sources.push(fin_j.text.clone());
            let chosen_id = Some(fin_j.rec.id);
            let final_digest = fin_j.text.as_ref().map(|_| fin_j.rec.digest.clone());
            self.attempts.push(AttemptLog {
                index: k,
                stage: Stage::A,
                candidates: records,
                chosen: chosen_id,
                smoke_tests,
                evaluation: eval,
                repair,
                final_digest,
                store_size: self.store.len(),
                diagnostics: Some(s_vec),
                z: Some(z),
                decision,
                times,
                summary,
                adapter: adapter_flags,
            });
            outcome = decision;
            if decision.kind != DecisionKind::RetryStageA {
                break;
            }
        }

        let mut stage_b_s = 0.0;
        let mut stage_b_used = false;
        if outcome.kind == DecisionKind::EscalateStageB {
            stage_b_used = true;
            let (d, src, s) = self.stage_b(last_slice.as_deref());
            stage_b_s = s;
            outcome = d;
            if d.kind == DecisionKind::Accept {
                final_source = src;
            }
        }

        let passed = outcome.kind == DecisionKind::Accept;
        let summary = EpisodeSummary {
            task: self.task.id.clone(),
            mode: self.mode,
            seed: self.cfg.seed,
            r: self.cfg.r,
            tau: self.cfg.tau,
            stage_a_backend: self.stage_a_id.clone(),
            stage_b_backend: self.stage_b.identity(),
            stage_b_used,
            passed,
            final_reason: outcome.reason,
            attempts: self.attempts.len(),
            counters: self.counters,
            microtests: self.store.len(),
            stage_a_s,
            stage_b_s,
            total_s: stage_a_s + stage_b_s,
            notes: std::mem::take(&mut self.notes),
        };
        Ok(EpisodeOutput {
            log: EpisodeLog {
                summary,
                attempts: std::mem::take(&mut self.attempts),
            },
            store: self.store.clone(),
            final_source,
            attempt_sources: std::mem::take(&mut self.sources),
            transcript: std::mem::take(&mut self.transcript),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn push_attempt(
        &mut self,
        k: usize,
        stage: Stage,
        candidates: Vec<CandidateRecord>,
        chosen: Option<u32>,
        evaluation: Evaluation,
        final_digest: Option<String>,
        source: Option<String>,
        diagnostics: Option<DiagnosticVector>,
        z: Option<f64>,
        decision: Decision,
        times: PhaseTimes,
        adapter: Option<AdapterFlags>,
    ) {
        let summary = format!("attempt {k}: {}", evaluation.one_line());
        self.sources.push(source);
        self.attempts.push(AttemptLog {
            index: k,
            stage,
            candidates,
            chosen,
            smoke_tests: 0,
            evaluation,
            repair: None,
            final_digest,
            store_size: self.store.len(),
            diagnostics,
            z,
            decision,
            times,
            summary,
            adapter,
        });
    }

    fn stage_b(&mut self, last_slice: Option<&str>) -> (Decision, Option<String>, f64) {
        let k = self.attempts.len() + 1;
        let mut times = PhaseTimes::default();
        let failures: Vec<String> = self.attempts.iter().map(|a| a.summary.clone()).collect();
        let tests: Vec<String> = self
            .store
            .tests
            .iter()
            .map(|t| t.description.clone())
            .collect();
        let req = Request {
            role: Role::StageB,
            prompt: stage_b_prompt(self.task, &failures, last_slice, &tests),
            temperature: self.cfg.temperature(0),
            seed: call_seed(self.cfg.seed, Role::StageB, k, 0),
        };
        self.counters.stage_b_calls += 1;
        let backend = self.stage_b;
        let (reply, s) = self.call(backend, req, k, self.cfg.costs.stage_b_call);
        times.generate_s = s;
        let text = reply.and_then(|t| extract_module(&t).map_err(|e| e.to_string()));
        let fail = Decision::new(DecisionKind::Terminate, DecisionReason::StageBFailed);
        let (mut judged, s) = self.judge(k, vec![(0, text)]);
        times.judge_s = s;
        let j = judged.pop().expect("one candidate");
        let mode = EvalMode {
            reject_on_tests: false,
            formal: false,
            harness: false,
        };
        let (eval, s, _) = self.evaluate(k, &j, mode);
        times.evaluate_s = s;
        times.close();
        let decision = decide(0.0, self.cfg.tau, k, self.cfg.r, eval.passed(), true);
        let decision = if eval.passed() { decision } else { fail };
        let digest = j.text.as_ref().map(|_| j.rec.digest.clone());
        let total = times.total_s;
        let src = j.text.clone();
        self.push_attempt(
            k,
            Stage::B,
            vec![j.rec.clone()],
            Some(0),
            eval,
            digest,
            src.clone(),
            None,
            None,
            decision,
            times,
            None,
        );
        (decision, src, total)
    }
}
