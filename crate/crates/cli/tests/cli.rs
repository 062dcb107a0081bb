use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use hdlforge::agents::{EpisodeLog, Stage};
use hdlforge::config::RunConfig;
use hdlforge_cli::{resolve_config, Cli, Overrides, RunSummary};
use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn hdlforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdlforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn run_fixtures(out: &Path, extra: &[&str]) -> Output {
    let tasks = fixtures().join("tasks");
    let mut args = vec!["run", s(&tasks), "--out", s(out)];
    args.extend_from_slice(extra);
    let o = hdlforge(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    o
}

fn read_log(path: &Path) -> EpisodeLog {
    EpisodeLog::parse_jsonl(&std::fs::read_to_string(path).unwrap())
        .unwrap()
        .remove(0)
}

/// Each hyperparameter: its flag, its config-file key, a file value and a
/// flag value (both different from the default), and a reader.
type Reader = fn(&RunConfig) -> Value;

fn hyperparameters() -> Vec<(&'static str, &'static str, Value, &'static str, Reader)> {
    vec![
        ("--tau", "tau", json!(0.3), "0.7", |c| json!(c.tau)),
        ("--r", "r", json!(2), "7", |c| json!(c.r)),
        ("--n", "n", json!(2), "4", |c| json!(c.n)),
        ("--m", "m", json!(2), "6", |c| json!(c.m)),
        ("--d", "d", json!(4), "12", |c| json!(c.d)),
        ("--dmax", "d_max", json!(2), "7", |c| json!(c.d_max)),
        ("--wsmoke", "w_smoke", json!(50), "150", |c| {
            json!(c.w_smoke)
        }),
        ("--llint", "l_lint", json!(10), "40", |c| json!(c.l_lint)),
        ("--lmax", "l_max", json!(12), "44", |c| json!(c.l_max)),
        ("--dtwave", "dt_wave", json!(16), "128", |c| {
            json!(c.dt_wave)
        }),
        ("--batch", "batch", json!(3), "5", |c| json!(c.batch)),
        ("--lambda", "lambda", json!(0.1), "0.001", |c| {
            json!(c.lambda)
        }),
        ("--jobs", "jobs", json!(2), "3", |c| json!(c.jobs)),
        ("--seed", "seed", json!(11), "13", |c| json!(c.seed)),
    ]
}

#[test]
fn precedence_is_flag_then_file_then_default() {
    let dir = tempfile::tempdir().unwrap();
    let defaults = RunConfig::default();
    for (flag, key, file_value, flag_value, read) in hyperparameters() {
        let cfg_path = dir.path().join(format!("{key}.json"));
        std::fs::write(&cfg_path, json!({ key: file_value.clone() }).to_string()).unwrap();
        let parse = |args: &[&str]| {
            let mut argv = vec!["hdlforge"];
            argv.extend_from_slice(args);
            argv.extend_from_slice(&["report", "x"]);
            resolve_config(&Cli::try_parse_from(argv).unwrap().overrides).unwrap()
        };
        let none = parse(&[]);
        let file = parse(&["--config", s(&cfg_path)]);
        let both = parse(&["--config", s(&cfg_path), flag, flag_value]);
        let flag_only = parse(&[flag, flag_value]);
        assert_eq!(read(&none), read(&defaults), "{key} default");
        assert_eq!(read(&file), file_value, "{key} from file");
        let want: Value = serde_json::from_str(flag_value).unwrap();
        assert_eq!(read(&both), want, "{key}: flag beats file");
        assert_eq!(read(&flag_only), want, "{key}: flag beats default");
        // The other fields keep their defaults.
        assert_eq!(both.temperatures, defaults.temperatures);
    }
}

#[test]
fn flags_work_after_the_subcommand() {
    let cli = Cli::try_parse_from(["hdlforge", "run", "t", "--tau", "0.7", "--r", "2"]).unwrap();
    let c = resolve_config(&cli.overrides).unwrap();
    assert_eq!((c.tau, c.r), (0.7, 2));
}

#[test]
fn defaults_match_the_documented_table() {
    let c = resolve_config(&Overrides::default()).unwrap();
    assert_eq!((c.n, c.m, c.r, c.d, c.d_max), (3, 4, 5, 10, 5));
    assert_eq!((c.w_smoke, c.l_lint, c.l_max, c.dt_wave), (100, 30, 30, 64));
    assert_eq!((c.tau, c.batch_width(), c.lambda), (0.5, 12, None));
}

#[test]
fn tau_flag_reaches_the_episode_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"tau": 0.3, "seed": 5}"#).unwrap();
    let out = dir.path().join("runs");
    let task = fixtures().join("tasks/counter2");
    let o = hdlforge(&[
        "run",
        s(&task),
        "--config",
        s(&cfg),
        "--tau",
        "0.7",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = read_log(&out.join("counter2.jsonl"));
    assert_eq!((log.summary.tau, log.summary.seed), (0.7, 5));
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(hdlforge(&["run"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = hdlforge(&["run", s(&empty)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no tasks"));
    let task = fixtures().join("tasks/counter2");
    assert_eq!(
        hdlforge(&["run", s(&task), "--tau", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        hdlforge(&["run", s(&task), "--n", "0"]).status.code(),
        Some(2)
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(
        hdlforge(&["run", s(&task), "--config", s(&bad)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(hdlforge(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn run_summary_matches_golden_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run_fixtures(a.path(), &["--jobs", "3"]);
    let ob = run_fixtures(b.path(), &["--jobs", "1"]);
    assert_eq!(stdout(&oa), stdout(&ob));
    assert_eq!(
        stdout(&oa),
        std::fs::read_to_string(golden("run_summary.txt")).unwrap()
    );
    let json = std::fs::read_to_string(a.path().join("summary.json")).unwrap();
    assert_eq!(
        json,
        std::fs::read_to_string(golden("run_summary.json")).unwrap()
    );
    for f in [
        "counter2.jsonl",
        "stuck.jsonl",
        "counter2.transcript.jsonl",
        "stuck/microtests.json",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(a.path().join("counter2/final.v").is_file());
    assert!(!a.path().join("broken.jsonl").exists());
}

#[test]
fn run_summary_values() {
    let dir = tempfile::tempdir().unwrap();
    run_fixtures(dir.path(), &[]);
    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(
        (summary.tasks, summary.completed, summary.errors),
        (3, 2, 1)
    );
    let broken = &summary.records[0];
    assert_eq!(broken.task, "broken");
    assert!(broken.error.as_deref().unwrap().starts_with("tb.v:"));
    // A golden first attempt pays one plan call, one coder round, compile,
    // lint, one smoke test, one formal check and the official run.
    let counter = summary.records[1].episode.as_ref().unwrap();
    assert!((counter.total_s - (2.0 + 4.0 + 0.2 + 0.1 + 0.05 + 1.0 + 0.5)).abs() < 1e-9);
    let stuck = summary.records[2].episode.as_ref().unwrap();
    assert_eq!(stuck.attempts, 6);
    assert!(stuck.stage_b_used && stuck.passed);
    assert_eq!(summary.pass_rate_pct, 100.0);
    assert_eq!(summary.escalation_pct, 50.0);
}

#[test]
fn seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    run_fixtures(dir.path(), &["--seed", "42"]);
    assert_eq!(read_log(&dir.path().join("stuck.jsonl")).summary.seed, 42);
}

#[test]
fn report_replays_decisions() {
    let dir = tempfile::tempdir().unwrap();
    run_fixtures(dir.path(), &[]);
    let o = hdlforge(&["report", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with(
        "counter2: Accept\nstuck: RetryStageA RetryStageA RetryStageA RetryStageA EscalateStageB Accept\n"
    ));
    assert!(text.contains("pass rate 100.0%  escalation 50.0%"));
    assert_eq!(
        hdlforge(&["report", "/nonexistent/logs"]).status.code(),
        Some(2)
    );
}

fn separable(path: &Path) {
    let row = |smoke: f64, label: bool| json!({"s": {"s_comp": 1.0, "s_lint": 1.0, "s_smoke": smoke, "s_trace": 0.5, "s_budget": 0.6}, "label": label});
    let rows: Vec<Value> = (0..50)
        .flat_map(|_| [row(0.9, true), row(0.1, false)])
        .collect();
    std::fs::write(path, json!({ "rows": rows }).to_string()).unwrap();
}

#[test]
fn calibrate_separable_set() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    separable(&data);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let o = hdlforge(&["calibrate", s(&data), "--out", s(&out_a), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("rows 100  positive 50  negative 50"),
        "{text}"
    );
    assert!(text.contains("training accuracy 100.0%"), "{text}");
    assert!(text.contains("training loss "));
    hdlforge(&["calibrate", s(&data), "--out", s(&out_b), "--seed", "3"]);
    let wa = std::fs::read(out_a.join("weights.json")).unwrap();
    assert_eq!(wa, std::fs::read(out_b.join("weights.json")).unwrap());
    let w: Value = serde_json::from_slice(&wa).unwrap();
    assert!(w["w"][2].as_f64().unwrap() > 0.0);
    assert_eq!(w["w"].as_array().unwrap().len(), 5);
    for key in ["w0", "lambda", "isotonic"] {
        assert!(w.get(key).is_some(), "{key}");
    }
    assert!(w["isotonic"]["x"].is_array() && w["isotonic"]["y"].is_array());

    // The written weights are accepted by `run`.
    let task = fixtures().join("tasks/counter2");
    let o = hdlforge(&["run", s(&task), "--weights", s(&out_a.join("weights.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn calibrate_fixed_lambda_and_stdout_weights() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    separable(&data);
    let o = hdlforge(&["calibrate", s(&data), "--lambda", "0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let w: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(w["lambda"], json!(0.01));
    assert!(stderr(&o).contains("lambda 0.01 (given)"));
}

#[test]
fn calibrate_single_class_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    run_fixtures(dir.path(), &[]);
    // Every Stage-A attempt of `counter2` belongs to a Stage-A success.
    let o = hdlforge(&["calibrate", s(&dir.path().join("counter2.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("each label"));
    // With `stuck` added both labels are present.
    let o = hdlforge(&["calibrate", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

/// Escalations and accuracy by replaying the recorded decisions by hand.
fn hand_replay(logs: &[EpisodeLog], tau: f64) -> (usize, usize) {
    let (mut escalations, mut passed) = (0, 0);
    for log in logs {
        let stage_a: Vec<_> = log
            .attempts
            .iter()
            .filter(|a| a.stage == Stage::A)
            .collect();
        let mut outcome = None;
        for (k, a) in stage_a.iter().enumerate() {
            if a.passed() {
                outcome = Some(true);
                break;
            }
            if k + 1 >= log.summary.r || a.z.unwrap() < tau {
                escalations += 1;
                outcome = log
                    .attempts
                    .iter()
                    .find(|a| a.stage == Stage::B)
                    .map(|b| b.passed());
                break;
            }
        }
        if outcome == Some(true) {
            passed += 1;
        }
    }
    (escalations, passed)
}

#[test]
fn sweep_rows_match_hand_replay() {
    let dir = tempfile::tempdir().unwrap();
    run_fixtures(dir.path(), &["--r", "3"]);
    let o = hdlforge(&["sweep", s(dir.path()), "--grid", "0.3,0.5,0.7,1.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let logs: Vec<EpisodeLog> = ["counter2.jsonl", "stuck.jsonl"]
        .iter()
        .map(|f| read_log(&dir.path().join(f)))
        .collect();
    for (line, tau) in lines[1..].iter().zip([0.3, 0.5, 0.7, 1.0]) {
        let f: Vec<&str> = line.split(',').collect();
        let (esc, passed) = hand_replay(&logs, tau);
        assert_eq!(
            f[col("escalations")].parse::<usize>().unwrap(),
            esc,
            "tau {tau}"
        );
        let rate: f64 = f[col("pass_rate")].parse().unwrap();
        assert!((rate - passed as f64 / 2.0).abs() < 1e-4);
    }
    let one = hdlforge(&[
        "sweep",
        s(dir.path()),
        "--grid",
        "0.5",
        "--out",
        s(&dir.path().join("sw")),
    ]);
    assert_eq!(stdout(&one).lines().count(), 2);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap(),
        stdout(&one)
    );
    assert_eq!(
        hdlforge(&["sweep", s(dir.path()), "--grid", "1.5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn bench_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/tasks");
    let o = hdlforge(&[
        "bench",
        s(&corpus),
        "--per-class",
        "1",
        "--configs",
        "with-microtests,without-microtests",
        "--jobs",
        "4",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv, stdout(&o));
    assert!(
        csv.starts_with("config,bug_class,detection_pct,median_iters,mean_time_s,escalation_pct\n")
    );
    assert_eq!(csv.lines().filter(|l| l.contains(",all,")).count(), 2);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema"], json!(1));
    assert!(report["instances"].as_array().unwrap().len() >= 2);
    let bad = hdlforge(&["bench", s(&corpus), "--configs", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
}

fn adapter(source: &Path, extra: Option<&str>) -> Vec<String> {
    let mut v = vec![
        "python3".to_string(),
        fixtures().join("adapter.py").display().to_string(),
        source.display().to_string(),
    ];
    v.extend(extra.map(String::from));
    v
}

fn wrap(out: &Path, task: &str, adapter: &[String]) -> Output {
    let t = fixtures().join("tasks").join(task);
    let mut args = vec![
        "wrap".to_string(),
        "--out".into(),
        s(out).into(),
        s(&t).into(),
        "--".into(),
    ];
    args.extend_from_slice(adapter);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    hdlforge(&refs)
}

#[test]
fn wrap_runs_an_external_adapter() {
    let dir = tempfile::tempdir().unwrap();
    let golden_src = fixtures().join("tasks/counter2/golden.v");
    let o = wrap(dir.path(), "counter2", &adapter(&golden_src, None));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = read_log(&dir.path().join("counter2.jsonl"));
    assert!(log.summary.passed && !log.summary.stage_b_used);
    assert_eq!(log.summary.attempts, 1);

    // The wrapped run makes the same decisions as the native run when the
    // adapter returns what the native coder returns.
    let native = tempfile::tempdir().unwrap();
    let t = fixtures().join("tasks/stuck");
    hdlforge(&["run", s(&t), "--out", s(native.path()), "--r", "3"]);
    let wrapped = tempfile::tempdir().unwrap();
    let wraps = fixtures().join("tasks/stuck/wraps.v");
    let args: Vec<String> = ["wrap", "--r", "3", "--out", s(wrapped.path()), s(&t), "--"]
        .iter()
        .map(|a| a.to_string())
        .chain(adapter(&wraps, None))
        .collect();
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(hdlforge(&refs).status.code(), Some(0));
    let n = read_log(&native.path().join("stuck.jsonl"));
    let w = read_log(&wrapped.path().join("stuck.jsonl"));
    let kinds = |l: &EpisodeLog| l.decisions().iter().map(|d| d.kind).collect::<Vec<_>>();
    assert_eq!(kinds(&n), kinds(&w));
}

#[test]
fn wrap_records_adapter_budget_flag() {
    let dir = tempfile::tempdir().unwrap();
    let wraps = fixtures().join("tasks/stuck/wraps.v");
    let o = wrap(
        dir.path(),
        "stuck",
        &adapter(&wraps, Some(r#"{"budget_exhausted": true}"#)),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = read_log(&dir.path().join("stuck.jsonl"));
    let first = &log.attempts[0];
    assert_eq!(first.diagnostics.unwrap().s_budget, 0.0);
    assert!(first.decision.escalates());
    assert!(log.summary.stage_b_used);
}

#[test]
fn wrap_protocol_error_exits_3_and_quotes_payload() {
    let dir = tempfile::tempdir().unwrap();
    let bad = ["sh", "-c", "read l; echo 'this is not json'"].map(String::from);
    let o = wrap(dir.path(), "counter2", &bad);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("this is not json"), "{}", stderr(&o));
    let missing = ["/nonexistent/adapter"].map(String::from);
    assert_eq!(
        wrap(dir.path(), "counter2", &missing).status.code(),
        Some(3)
    );
}

#[test]
fn http_backend_without_endpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"backend": {"kind": "http-chat"}}"#).unwrap();
    let task = fixtures().join("tasks/counter2");
    let o = Command::new(env!("CARGO_BIN_EXE_hdlforge"))
        .args(["run", s(&task), "--config", s(&cfg)])
        .env_remove("HDLFORGE_API_URL")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("HDLFORGE_API_URL"));
}
