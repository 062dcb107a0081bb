//! Runs every acceptance criterion and prints one PASS/FAIL line each.

mod common;

use std::time::{Duration, Instant};

use common::oracles::*;
use common::*;
use hdlforge::agents::*;
use hdlforge::bench::*;
use hdlforge::config::RunConfig;
use hdlforge::controller::*;
use hdlforge::diagnostics::*;
use hdlforge::formal::amplify;
use hdlforge::microtests::MicroTestStore;
use hdlforge::rtl::{backward_cone, build_signal_graph, parse_module, SourceUnit};
use hdlforge::tools::run_testbench;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn c1_diagnostics() -> Outcome {
    ensure(close(lint_signal(15, 30), 0.5, 1e-9), || {
        "lint_signal(15,30)".into()
    })?;
    ensure(close(budget_signal(2, 5), 0.6, 1e-9), || {
        "budget_signal(2,5)".into()
    })?;
    let y = |c| FailurePoint::new("y", c);
    ensure(close(trace_signal(None, None, 64), 0.5, 1e-9), || {
        "trace default".into()
    })?;
    ensure(
        close(trace_signal(Some(&y(7)), None, 64), 0.5, 1e-9),
        || "trace without prior".into(),
    )?;
    ensure(
        close(trace_signal(Some(&y(9)), Some(&y(9)), 64), 1.0, 1e-9),
        || "trace max".into(),
    )?;
    ensure(
        close(
            trace_signal(Some(&FailurePoint::new("q", 0)), Some(&y(64)), 64),
            0.0,
            1e-9,
        ),
        || "trace min".into(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let l_lint = rng.random_range(1..100);
        let r = rng.random_range(1..20);
        let bits: Vec<bool> = (0..rng.random_range(1..50)).map(|_| rng.random()).collect();
        let dt = rng.random_range(1..128);
        let a = FailurePoint::new(
            if rng.random() { "y" } else { "q" },
            rng.random_range(0..400),
        );
        let b = FailurePoint::new("y", rng.random_range(0..400));
        let vals = [
            lint_signal(rng.random_range(0..200), l_lint),
            budget_signal(rng.random_range(0..30), r),
            smoke_signal(&bits).unwrap(),
            trace_signal(Some(&a), Some(&b), dt),
        ];
        ensure(vals.iter().all(|v| (0.0..=1.0).contains(v)), || {
            format!("out of range: {vals:?}")
        })?;
    }
    Ok("exact values and 10000 random inputs in [0,1]".into())
}

fn c2_pass_at_k() -> Outcome {
    let mut n = 0;
    for f in 1..=12 {
        for c in 0..=f {
            for k in 1..=f {
                let got = pass_at_k(f, c, k).map_err(|e| e.to_string())?;
                let want = pass_at_k_enumerated(f, c, k);
                ensure(close(got, want, 1e-12), || {
                    format!("f={f} c={c} k={k}: {got} vs {want}")
                })?;
                n += 1;
            }
        }
    }
    let spot = pass_at_k(10, 3, 5).unwrap();
    ensure(close(spot, 11.0 / 12.0, 1e-12), || {
        format!("pass@5(10,3) = {spot}")
    })?;
    Ok(format!(
        "{n} triples match enumeration; (10,3,5) = {spot:.6}"
    ))
}

fn c3_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for inst in 0..200 {
        let ys: Vec<f64> = (0..100)
            .map(|_| {
                if rng.random::<f64>() < 0.3 {
                    rng.random()
                } else {
                    rng.random_range(0..2) as f64
                }
            })
            .collect();
        let xs: Vec<f64> = {
            let mut v: Vec<f64> = (0..100).map(|_| rng.random()).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let ys = &ys[..xs.len()];
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let map = fit_isotonic(&pts);
        let want = isotonic_minmax(ys);
        for (x, w) in xs.iter().zip(&want) {
            ensure(close(map.eval(*x), *w, 1e-6), || {
                format!("instance {inst}: {} vs {w}", map.eval(*x))
            })?;
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rows: Vec<([f64; 5], bool)> = (0..30)
            .map(|_| {
                (
                    [
                        rng.random(),
                        rng.random(),
                        rng.random(),
                        rng.random(),
                        rng.random(),
                    ],
                    rng.random(),
                )
            })
            .collect();
        let mut data = CalibrationDataset::default();
        for (x, y) in &rows {
            data.push(DiagnosticVector::from_array(*x), *y);
        }
        let theta: [f64; 6] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let lambda = rng.random_range(0.0..0.5);
        let (_, g) = loss_and_grad(&theta, &data.rows, lambda);
        for j in 0..6 {
            let h = 1e-5;
            let (mut up, mut dn) = (theta, theta);
            up[j] += h;
            dn[j] -= h;
            let fd =
                (logistic_loss(&up, &rows, lambda) - logistic_loss(&dn, &rows, lambda)) / (2.0 * h);
            let rel = (g[j] - fd).abs() / fd.abs().max(1e-3);
            worst = worst.max(rel);
        }
    }
    ensure(worst <= 1e-6, || {
        format!("gradient relative error {worst:e}")
    })?;
    let mut data = CalibrationDataset::default();
    for i in 0..60 {
        let smoke = i as f64 / 59.0;
        let lint = rng.random();
        data.push(
            DiagnosticVector::from_array([1.0, lint, smoke, 0.5, 0.4]),
            smoke > 0.45,
        );
    }
    let model = calibrate(&data, None).map_err(|e| e.to_string())?;
    let correct = data
        .rows
        .iter()
        .filter(|r| (logistic(model.weights.linear(&r.s)) >= 0.5) == r.label)
        .count();
    ensure(correct == data.rows.len(), || {
        format!("training accuracy {correct}/{}", data.rows.len())
    })?;
    Ok(format!(
        "200 PAVA instances; gradient rel err {worst:.1e}; separable accuracy 100%"
    ))
}

fn c4_decisions(logs: &[EpisodeLog]) -> Outcome {
    for passed in [false, true] {
        for below in [false, true] {
            for exhausted in [false, true] {
                for already in [false, true] {
                    let z = if below { 0.1 } else { 0.9 };
                    let k = if exhausted { 5 } else { 1 };
                    let d = decide(z, 0.5, k, 5, passed, already);
                    let escalate = !passed && !already && (z < 0.5 || k >= 5);
                    ensure(d.escalates() == escalate, || {
                        format!("{passed} {below} {exhausted} {already}: {d:?}")
                    })?;
                    ensure((d.kind == DecisionKind::Accept) == passed, || {
                        format!("accept mismatch {d:?}")
                    })?;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let z: f64 = rng.random();
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let (t1, t2) = (a.min(b), a.max(b));
        let k = rng.random_range(1..8);
        let passed = rng.random_bool(0.2);
        if decide(z, t1, k, 5, passed, false).escalates() {
            ensure(decide(z, t2, k, 5, passed, false).escalates(), || {
                format!("z={z} t1={t1} t2={t2}")
            })?;
        }
    }
    let worst = logs.iter().map(|l| l.stage_b_attempts()).max().unwrap_or(0);
    ensure(worst <= 1, || format!("a log has {worst} Stage-B attempts"))?;
    Ok(format!(
        "truth table, 10000 τ pairs, {} logs with ≤ 1 Stage-B attempt",
        logs.len()
    ))
}

fn c5_episodes(logs: &mut Vec<EpisodeLog>) -> Outcome {
    let tasks = GoldenTask::load_all(&fixtures()).map_err(|e| e.to_string())?;
    ensure(tasks.len() >= 10, || format!("{} tasks", tasks.len()))?;
    let cfg = RunConfig {
        tau: 0.0,
        ..RunConfig::default()
    };
    let mut fail_cases = 0;
    for t in &tasks {
        let pass_b = ScriptedBackend::new("fixture", t.task.script.clone().unwrap());
        let out = run_episode(
            &t.task,
            &RunConfig::default(),
            &ScoreModel::default(),
            &Backends::uniform(&pass_b),
        );
        ensure(
            out.passed() && out.log.attempts.len() == 1 && !out.log.summary.stage_b_used,
            || {
                format!(
                    "{}: pass scenario took {} attempts",
                    t.task.id,
                    out.log.attempts.len()
                )
            },
        )?;
        logs.push(out.log);
        let broken = "module broken(input wire clk); endmodule\n".to_string();
        let fail_b = scripted(&[broken.clone()], &[broken], &[t.golden.clone()]);
        let mk = || {
            run_episode(
                &t.task,
                &cfg,
                &ScoreModel::default(),
                &Backends::uniform(&fail_b),
            )
        };
        let a = mk();
        ensure(
            a.log.attempts.len() == cfg.r + 1 && a.log.summary.stage_b_used && a.passed(),
            || {
                format!(
                    "{}: fail scenario gave {} attempts",
                    t.task.id,
                    a.log.attempts.len()
                )
            },
        )?;
        let b = mk();
        ensure(a.log.to_jsonl() == b.log.to_jsonl(), || {
            format!("{}: logs differ between runs", t.task.id)
        })?;
        logs.push(a.log);
        fail_cases += 1;
    }
    Ok(format!(
        "{} tasks: pass in 1 attempt; fail → {} attempts with Stage B; logs byte-identical",
        fail_cases,
        cfg.r + 1
    ))
}

fn c6_cegis(logs: &mut Vec<EpisodeLog>) -> Outcome {
    let t = task("edge_detect_blind");
    let bad = mutant("edge_detect_blind", BugClass::Reset, 0);
    let src = SourceUnit::new("m.v", bad.as_str());
    let m = parse_module(&src).map_err(|e| e.to_string())?;
    ensure(run_testbench(&m, &t.testbench, 8, None).passed, || {
        "official testbench is not blind".into()
    })?;
    let mut store = MicroTestStore::new(&t.id);
    let amp = amplify(&m, Some(&t.header_module), &t.props, &mut store, 10, 0);
    let cex = amp.check.counterexample.ok_or("no counterexample")?;
    ensure(cex.depth() <= 2, || {
        format!("counterexample depth {}", cex.depth())
    })?;
    ensure(amp.inserted && store.len() == 1, || {
        "no micro-test stored".into()
    })?;

    let b = scripted(&[bad.clone()], &[bad], &[golden("edge_detect_blind")]);
    let cfg = RunConfig {
        tau: 0.0,
        r: 2,
        repair: false,
        ..RunConfig::default()
    };
    let out = run_episode(&t, &cfg, &ScoreModel::default(), &Backends::uniform(&b));
    let a = &out.log.attempts;
    ensure(a[0].evaluation.verdict == Verdict::FormalReject, || {
        format!("attempt 1: {:?}", a[0].evaluation.verdict)
    })?;
    ensure(a[1].evaluation.verdict == Verdict::MicrotestReject, || {
        format!("attempt 2: {:?}", a[1].evaluation.verdict)
    })?;
    ensure(a[0].final_digest == a[1].final_digest, || {
        "resubmission differs".into()
    })?;
    let formal = out.log.summary.counters.formal_calls;
    ensure(formal == 1, || format!("formal calls {formal}"))?;
    logs.push(out.log);
    Ok(format!(
        "counterexample depth {}; resubmission rejected in smoke; formal calls = {formal}",
        cex.depth()
    ))
}

fn c7_directionality(results: &mut Vec<InstanceResult>) -> Outcome {
    let tasks = GoldenTask::load_all(&fixtures()).map_err(|e| e.to_string())?;
    let corpus = build_corpus(&tasks, 5).map_err(|e| e.to_string())?;
    for c in BugClass::ALL {
        let n = corpus.iter().filter(|i| i.mutant.spec.class == c).count();
        ensure(n >= 5, || format!("{c}: {n} instances"))?;
    }
    let configs = [BenchConfig::WithMicrotests, BenchConfig::WithoutMicrotests];
    let report = run_bug_benchmark(
        &corpus,
        &configs,
        &RunConfig::default(),
        &ScoreModel::default(),
        4,
    );
    let with = report
        .row(BenchConfig::WithMicrotests, "all")
        .ok_or("missing row")?;
    let without = report
        .row(BenchConfig::WithoutMicrotests, "all")
        .ok_or("missing row")?;
    results.extend(report.instances.iter().cloned());
    ensure(with.detection_pct >= without.detection_pct, || {
        format!(
            "detection {} < {}",
            with.detection_pct, without.detection_pct
        )
    })?;
    ensure(with.median_iters <= without.median_iters, || {
        format!(
            "median iterations {} > {}",
            with.median_iters, without.median_iters
        )
    })?;
    Ok(format!(
        "detection {:.1}% vs {:.1}%; median iterations {:.1} vs {:.1} ({} instances)",
        with.detection_pct,
        without.detection_pct,
        with.median_iters,
        without.median_iters,
        corpus.len()
    ))
}

fn c8_cones() -> Outcome {
    let tasks = GoldenTask::load_all(&fixtures()).map_err(|e| e.to_string())?;
    let corpus = build_corpus(&tasks, 5).map_err(|e| e.to_string())?;
    let mut max_slice = 0;
    for i in &corpus {
        let m = parse_module(&i.mutant.source).map_err(|e| e.to_string())?;
        let r = run_testbench(&m, &i.task.testbench, 8, None);
        let (y, cycle) = match (&r.fail_signal, r.fail_cycle) {
            (Some(y), Some(c)) => (y.clone(), c),
            _ => {
                let mut store = MicroTestStore::new(&i.task.id);
                let amp = amplify(
                    &m,
                    Some(&i.task.header_module),
                    &i.task.props,
                    &mut store,
                    10,
                    0,
                );
                let id = amp
                    .test_id
                    .ok_or_else(|| format!("{}: undetected by testbench and formal", i.id))?;
                let t = store.tests.iter().find(|t| t.id == id).unwrap();
                let o = t.replay(&m, 100);
                let fp = o
                    .first_failure
                    .ok_or_else(|| format!("{}: micro-test passes", i.id))?;
                (fp.signal, fp.cycle)
            }
        };
        let cone = backward_cone(&build_signal_graph(&m), &i.mutant.source, &y, cycle, 5, 30)
            .map_err(|e| format!("{}: {e}", i.id))?;
        ensure(cone.contains(&i.mutant.target), || {
            format!("{}: `{}` not in cone of `{y}`", i.id, i.mutant.target)
        })?;
        ensure(cone.slice.len() <= 30, || {
            format!("{}: slice of {}", i.id, cone.slice.len())
        })?;
        max_slice = max_slice.max(cone.slice.len());
    }
    Ok(format!(
        "{} mutants; targets in cone; largest slice {max_slice} lines",
        corpus.len()
    ))
}

fn c9_wrap_parity(logs: &mut Vec<EpisodeLog>) -> Outcome {
    let model = ScoreModel {
        weights: Weights {
            w0: -2.534,
            w: [0.0, 0.0, 0.0, 0.0, 4.9],
            lambda: 0.0,
            fit_meta: None,
        },
        ..ScoreModel::default()
    };
    let cfg = RunConfig {
        n: 1,
        m: 1,
        repair: false,
        formal: false,
        ..RunConfig::default()
    };
    let mut compared = 0;
    for (name, fails, tau) in [
        ("counter2", 2, 0.5),
        ("fsm3", 1, 0.5),
        ("pulse_stretch", 5, 0.2),
        ("mod10", 9, 0.0),
        ("mux4", 0, 0.5),
    ] {
        let g = golden(name);
        let bad = mutant(name, BugClass::OffByOne, 0);
        let seq: Vec<String> = (0..fails).map(|_| bad.clone()).chain([g.clone()]).collect();
        let cfg = RunConfig { tau, ..cfg.clone() };
        let t = task(name);
        let nb = scripted(&seq, &[], &[g.clone()]);
        let native = run_episode(&t, &cfg, &model, &Backends::uniform(&nb));
        let mut adapter = ScriptedAdapter::new(
            seq.iter()
                .map(|s| AdapterResponse {
                    source: s.clone(),
                    ..AdapterResponse::default()
                })
                .collect(),
        );
        let sb = scripted(&[], &[], &[g]);
        let wrapped =
            wrap_external(&t, &cfg, &model, &mut adapter, &sb).map_err(|e| e.to_string())?;
        let (a, b) = (native.log.decisions(), wrapped.log.decisions());
        ensure(a == b, || format!("{name}: {a:?} vs {b:?}"))?;
        compared += a.len();
        logs.push(native.log);
        logs.push(wrapped.log);
    }
    Ok(format!("5 scenarios, {compared} decisions identical"))
}

fn c10_sweep(logs: &mut Vec<EpisodeLog>) -> Outcome {
    // z falls with the remaining budget: about 0.8, 0.6, 0.36, 0.17, 0.07.
    let model = ScoreModel {
        weights: Weights {
            w0: -2.534,
            w: [0.0, 0.0, 0.0, 0.0, 4.9],
            lambda: 0.0,
            fit_meta: None,
        },
        ..ScoreModel::default()
    };
    let mut cfg = RunConfig {
        n: 1,
        m: 1,
        tau: 0.0,
        repair: false,
        ..RunConfig::default()
    };
    cfg.costs.stage_b_call = 1.0;
    let mut trajectories = Vec::new();
    for (name, fails) in [
        ("counter2", 9),
        ("mod10", 3),
        ("fsm3", 9),
        ("pulse_stretch", 3),
        ("mux4", 2),
    ] {
        let g = golden(name);
        let bad = mutant(name, BugClass::OffByOne, 0);
        let seq: Vec<String> = (0..fails).map(|_| bad.clone()).chain([g.clone()]).collect();
        let b = scripted(&seq, &[], &[g]);
        let out = run_episode(&task(name), &cfg, &model, &Backends::uniform(&b));
        let text = out.log.to_jsonl();
        let parsed = EpisodeLog::parse_jsonl(&text).map_err(|e| e.to_string())?;
        trajectories.push(parsed[0].trajectory());
        logs.push(out.log);
    }
    let rows = sweep_tau(&trajectories, &[0.3, 0.5, 0.7]).map_err(|e| e.to_string())?;
    ensure(rows.len() == 3, || format!("{} rows", rows.len()))?;
    let esc: Vec<usize> = rows.iter().map(|r| r.escalations).collect();
    ensure(esc.windows(2).all(|w| w[0] <= w[1]), || {
        format!("escalations {esc:?}")
    })?;
    let times: Vec<f64> = rows.iter().map(|r| r.mean_time_s).collect();
    ensure(times.windows(2).all(|w| w[0] > w[1]), || {
        format!("mean times {times:?}")
    })?;
    Ok(format!("escalations {esc:?}; mean time {:.2?}", times))
}

#[test]
fn acceptance() {
    let mut logs: Vec<EpisodeLog> = Vec::new();
    let mut bench: Vec<InstanceResult> = Vec::new();
    let mut lines = Vec::new();
    let mut failed = 0;
    let mut record = |n: usize, limit: Duration, t0: Instant, r: Outcome| {
        let dt = t0.elapsed();
        let r = r.and_then(|m| {
            if dt <= limit {
                Ok(m)
            } else {
                Err(format!("took {dt:.2?}, limit {limit:?}"))
            }
        });
        let line = match r {
            Ok(m) => format!("PASS criterion {n}: {m} [{dt:.2?}]"),
            Err(e) => {
                failed += 1;
                format!("FAIL criterion {n}: {e} [{dt:.2?}]")
            }
        };
        lines.push((n, line));
    };
    let s = |x: u64| Duration::from_secs(x);

    let t = Instant::now();
    record(1, s(1), t, c1_diagnostics());
    let t = Instant::now();
    record(2, s(5), t, c2_pass_at_k());
    let t = Instant::now();
    record(3, s(30), t, c3_calibration());
    let t = Instant::now();
    record(5, s(60), t, c5_episodes(&mut logs));
    let t = Instant::now();
    record(6, s(10), t, c6_cegis(&mut logs));
    let t = Instant::now();
    record(7, s(300), t, c7_directionality(&mut bench));
    let t = Instant::now();
    record(8, s(30), t, c8_cones());
    let t = Instant::now();
    record(9, s(30), t, c9_wrap_parity(&mut logs));
    let t = Instant::now();
    record(10, s(10), t, c10_sweep(&mut logs));
    let t = Instant::now();
    let bench_b = bench.iter().map(|r| r.stage_b_attempts).max().unwrap_or(0);
    let r4 = c4_decisions(&logs).and_then(|m| {
        if bench_b <= 1 {
            Ok(format!("{m}; {} bench episodes with ≤ 1", bench.len()))
        } else {
            Err(format!("a bench episode has {bench_b} Stage-B attempts"))
        }
    });
    record(4, s(5), t, r4);
    lines.sort();
    let report: Vec<String> = lines.into_iter().map(|(_, l)| l).collect();
    println!("{}", report.join("\n"));
    assert_eq!(failed, 0, "{}", report.join("\n"));
}
