use std::io::Write;
use std::path::{Path, PathBuf};

use hdlforge::agents::{
    run_episode, run_wrapped, Backend, Backends, EpisodeLog, EpisodeOutput, HttpBackend, Script,
    ScriptedBackend, TaskBundle, TaskError,
};
use hdlforge::bench::{build_corpus, run_bug_benchmark, BenchConfig, GoldenTask};
use hdlforge::config::{BackendKind, RunConfig};
use hdlforge::controller::{
    calibrate, logistic, sweep_csv, sweep_tau, CalibrationDataset, ProcessAdapter, ScoreModel,
};
use rayon::prelude::*;

use crate::args::{Cli, Command};
use crate::summary::{RunSummary, TaskRecord};
use crate::{io_err, load_model, resolve_config, CliError};

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.overrides)?;
    match &cli.command {
        Command::Run { tasks } => cmd_run(tasks, &cfg, &load_model(&cli.overrides)?, out),
        Command::Calibrate { inputs } => cmd_calibrate(inputs, &cfg, out),
        Command::Sweep { logs, grid } => cmd_sweep(logs, grid, &cfg, out),
        Command::Bench {
            corpus,
            configs,
            per_class,
        } => cmd_bench(
            corpus,
            configs,
            *per_class,
            &cfg,
            &load_model(&cli.overrides)?,
            out,
        ),
        Command::Wrap { tasks, adapter } => {
            cmd_wrap(tasks, adapter, &cfg, &load_model(&cli.overrides)?, out)
        }
        Command::Report { logs } => cmd_report(logs, &cfg, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// A directory holding `spec.md` is a task; any other directory is a corpus
/// whose subdirectories are tasks.
fn discover_tasks(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut found = Vec::new();
    for p in paths {
        if p.join("spec.md").is_file() || !p.is_dir() {
            found.push(p.clone());
            continue;
        }
        let mut subs: Vec<PathBuf> = std::fs::read_dir(p)
            .into_iter()
            .flatten()
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|s| s.is_dir())
            .collect();
        subs.sort();
        found.extend(subs);
    }
    found
}

fn task_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Paths in the message are made relative to the task directory.
fn load_error(dir: &Path, e: TaskError) -> String {
    e.to_string().replace(&format!("{}/", dir.display()), "")
}

/// Backends for one task under the configured kind.
enum TaskBackends {
    Scripted(ScriptedBackend),
    Http {
        stage_a: HttpBackend,
        stage_b: HttpBackend,
    },
}

impl TaskBackends {
    fn for_task(
        task: &TaskBundle,
        cfg: &RunConfig,
        shared: Option<&Script>,
    ) -> Result<Self, String> {
        match cfg.backend.kind {
            BackendKind::Scripted => {
                let script = shared
                    .or(task.script.as_ref())
                    .cloned()
                    .ok_or_else(|| "no script.json and no backend.script configured".to_string())?;
                Ok(TaskBackends::Scripted(ScriptedBackend::new(
                    task.id.clone(),
                    script,
                )))
            }
            BackendKind::HttpChat => Ok(TaskBackends::Http {
                stage_a: http(&cfg.backend.stage_a_model, cfg)?,
                stage_b: http(&cfg.backend.stage_b_model, cfg)?,
            }),
        }
    }

    fn backends(&self) -> Backends<'_> {
        match self {
            TaskBackends::Scripted(b) => Backends::uniform(b),
            TaskBackends::Http { stage_a, stage_b } => Backends {
                planner: stage_a,
                coder: stage_a,
                reflexion: stage_a,
                stage_b,
            },
        }
    }

    fn stage_b(&self) -> &dyn Backend {
        match self {
            TaskBackends::Scripted(b) => b,
            TaskBackends::Http { stage_b, .. } => stage_b,
        }
    }
}

fn http(model: &str, cfg: &RunConfig) -> Result<HttpBackend, String> {
    HttpBackend::from_env(model, cfg.backend.timeout_s).map_err(|e| e.to_string())
}

/// Fails early on backend settings that would break every task.
fn check_backend(cfg: &RunConfig) -> Result<Option<Script>, CliError> {
    if cfg.backend.kind == BackendKind::HttpChat {
        http(&cfg.backend.stage_a_model, cfg).map_err(CliError::Config)?;
    }
    cfg.backend
        .script
        .as_ref()
        .map(|p| Script::load(p).map_err(|e| CliError::Config(e.to_string())))
        .transpose()
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

fn finish(
    outputs: Vec<(TaskRecord, Option<EpisodeOutput>)>,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut records = Vec::new();
    for (rec, ep) in outputs {
        if let (Some(dir), Some(ep)) = (&cfg.out, &ep) {
            ep.write(dir).map_err(|e| io_err(dir, e))?;
        }
        records.push(rec);
    }
    let summary = RunSummary::new(records);
    if let Some(dir) = &cfg.out {
        write_file(&dir.join("summary.json"), &(summary.to_json() + "\n"))?;
    }
    emit(out, &summary.render())
}

fn cmd_run(
    tasks: &[PathBuf],
    cfg: &RunConfig,
    model: &ScoreModel,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let dirs = discover_tasks(tasks);
    if dirs.is_empty() {
        return Err(CliError::Usage("no tasks given".into()));
    }
    let shared = check_backend(cfg)?;
    let outputs = pool(cfg)?.install(|| {
        dirs.par_iter()
            .map(|dir| {
                let task = match TaskBundle::load(dir) {
                    Ok(t) => t,
                    Err(e) => {
                        return (TaskRecord::failed(task_name(dir), load_error(dir, e)), None)
                    }
                };
                match TaskBackends::for_task(&task, cfg, shared.as_ref()) {
                    Ok(b) => {
                        let ep = run_episode(&task, cfg, model, &b.backends());
                        (TaskRecord::ok(ep.log.summary.clone()), Some(ep))
                    }
                    Err(e) => (TaskRecord::failed(task.id.clone(), e), None),
                }
            })
            .collect::<Vec<_>>()
    });
    finish(outputs, cfg, out)
}

fn cmd_wrap(
    tasks: &[PathBuf],
    adapter: &[String],
    cfg: &RunConfig,
    model: &ScoreModel,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let dirs = discover_tasks(tasks);
    if dirs.is_empty() {
        return Err(CliError::Usage("no tasks given".into()));
    }
    let shared = check_backend(cfg)?;
    let mut outputs = Vec::new();
    // One adapter process per task, run in order: adapters may keep state.
    for dir in &dirs {
        let task = match TaskBundle::load(dir) {
            Ok(t) => t,
            Err(e) => {
                outputs.push((TaskRecord::failed(task_name(dir), load_error(dir, e)), None));
                continue;
            }
        };
        let b = match TaskBackends::for_task(&task, cfg, shared.as_ref()) {
            Ok(b) => b,
            Err(e) => {
                outputs.push((TaskRecord::failed(task.id.clone(), e), None));
                continue;
            }
        };
        let mut a = ProcessAdapter::spawn(adapter).map_err(|e| CliError::Adapter(e.to_string()))?;
        let ep = run_wrapped(&task, cfg, model, &mut a, b.stage_b())
            .map_err(|e| CliError::Adapter(format!("task {}: {e}", task.id)))?;
        outputs.push((TaskRecord::ok(ep.log.summary.clone()), Some(ep)));
    }
    finish(outputs, cfg, out)
}

/// Episode log files under `paths`; transcripts are skipped.
fn log_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.to_string_lossy();
                    name.ends_with(".jsonl") && !name.ends_with(".transcript.jsonl")
                })
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(CliError::Usage(format!(
                "{}: no such file or directory",
                p.display()
            )));
        }
    }
    Ok(files)
}

fn read_logs(files: &[PathBuf]) -> Result<Vec<EpisodeLog>, CliError> {
    let mut logs = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| io_err(f, e))?;
        let parsed = EpisodeLog::parse_jsonl(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))?;
        logs.extend(parsed);
    }
    Ok(logs)
}

fn cmd_calibrate(inputs: &[PathBuf], cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mut data = CalibrationDataset::default();
    let mut log_inputs = Vec::new();
    for p in inputs {
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let d: CalibrationDataset = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            data.rows.extend(d.rows);
        } else {
            log_inputs.push(p.clone());
        }
    }
    for log in read_logs(&log_files(&log_inputs)?)? {
        data.rows.extend(log.calibration_rows());
    }
    let model = calibrate(&data, cfg.lambda).map_err(|e| CliError::Usage(e.to_string()))?;

    let positives = data.rows.iter().filter(|r| r.label).count();
    let correct = data
        .rows
        .iter()
        .filter(|r| (logistic(model.weights.linear(&r.s)) >= 0.5) == r.label)
        .count();
    let mut report = format!(
        "rows {}  positive {}  negative {}\nlambda {} ({})\n",
        data.rows.len(),
        positives,
        data.rows.len() - positives,
        model.weights.lambda,
        if cfg.lambda.is_some() {
            "given"
        } else {
            "cross-validated"
        }
    );
    if let Some(m) = &model.weights.fit_meta {
        report += &format!("training loss {:.6}  iterations {}\n", m.loss, m.iterations);
    }
    report += &format!(
        "training accuracy {:.1}%\n",
        100.0 * correct as f64 / data.rows.len() as f64
    );
    if let Some(iso) = &model.isotonic {
        report += &format!("isotonic map: {} steps\n", iso.x.len());
        for (x, y) in iso.x.iter().zip(&iso.y) {
            report += &format!("  p >= {x:.4} -> {y:.4}\n");
        }
    }
    let json = model.to_json() + "\n";
    match &cfg.out {
        Some(dir) => {
            let path = dir.join("weights.json");
            write_file(&path, &json)?;
            emit(out, &format!("{report}wrote {}\n", path.display()))
        }
        None => {
            eprint!("{report}");
            emit(out, &json)
        }
    }
}

fn cmd_sweep(
    logs: &[PathBuf],
    grid: &[f64],
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let episodes = read_logs(&log_files(logs)?)?;
    let traj: Vec<_> = episodes.iter().map(EpisodeLog::trajectory).collect();
    let rows = sweep_tau(&traj, grid).map_err(|e| CliError::Usage(e.to_string()))?;
    let csv = sweep_csv(&rows);
    if let Some(dir) = &cfg.out {
        write_file(&dir.join("sweep.csv"), &csv)?;
    }
    emit(out, &csv)
}

fn cmd_bench(
    corpus: &Path,
    configs: &[String],
    per_class: usize,
    cfg: &RunConfig,
    model: &ScoreModel,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let arms = configs
        .iter()
        .map(|c| c.parse::<BenchConfig>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Usage)?;
    if per_class == 0 {
        return Err(CliError::Usage("--per-class must be at least 1".into()));
    }
    let golden = GoldenTask::load_all(corpus).map_err(|e| CliError::Usage(e.to_string()))?;
    if golden.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no golden tasks",
            corpus.display()
        )));
    }
    let instances = build_corpus(&golden, per_class).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_bug_benchmark(&instances, &arms, cfg, model, cfg.jobs);
    let csv = report.to_csv();
    if let Some(dir) = &cfg.out {
        write_file(&dir.join("bench.csv"), &csv)?;
        write_file(&dir.join("bench.json"), &(report.to_json() + "\n"))?;
    }
    emit(out, &csv)
}

fn cmd_report(logs: &[PathBuf], cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let episodes = read_logs(&log_files(logs)?)?;
    if episodes.is_empty() {
        return Err(CliError::Usage("no episode logs found".into()));
    }
    let mut text = String::new();
    for e in &episodes {
        let seq: Vec<String> = e
            .decisions()
            .iter()
            .map(|d| format!("{:?}", d.kind))
            .collect();
        text += &format!("{}: {}\n", e.summary.task, seq.join(" "));
    }
    let summary = RunSummary::new(
        episodes
            .into_iter()
            .map(|e| TaskRecord::ok(e.summary))
            .collect(),
    );
    if let Some(dir) = &cfg.out {
        write_file(&dir.join("report.json"), &(summary.to_json() + "\n"))?;
    }
    text += &summary.render();
    emit(out, &text)
}
