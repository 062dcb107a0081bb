use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Success,
    ToolError,
    Timeout,
    NotInstalled,
}

/// Outcome of one adapter invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub ok: bool,
    pub exit_kind: ExitKind,
    /// Captured stdout followed by stderr.
    pub stdout_digest: String,
    pub elapsed: f64,
    /// Isolated run directory; `None` for built-in actions.
    pub workspace: Option<PathBuf>,
}

impl ToolResult {
    pub fn builtin(ok: bool, elapsed: f64) -> Self {
        ToolResult {
            ok,
            exit_kind: if ok {
                ExitKind::Success
            } else {
                ExitKind::ToolError
            },
            stdout_digest: String::new(),
            elapsed,
            workspace: None,
        }
    }
}

/// Substitutes `{src}`, `{tb}` and `{out}` in every argument.
pub fn expand_argv(template: &[String], src: &Path, tb: &Path, out: &Path) -> Vec<String> {
    template
        .iter()
        .map(|a| {
            a.replace("{src}", &src.display().to_string())
                .replace("{tb}", &tb.display().to_string())
                .replace("{out}", &out.display().to_string())
        })
        .collect()
}

/// Runs `argv` inside `workspace` with a wall-clock limit. Output goes to
/// files under `out/` so a chatty tool cannot block on a full pipe.
pub fn run_external(argv: &[String], workspace: &Path, timeout_s: f64) -> ToolResult {
    let start = Instant::now();
    let done = |ok, exit_kind, digest: String| ToolResult {
        ok,
        exit_kind,
        stdout_digest: digest,
        elapsed: start.elapsed().as_secs_f64(),
        workspace: Some(workspace.to_path_buf()),
    };
    let Some((prog, args)) = argv.split_first() else {
        return done(
            false,
            ExitKind::NotInstalled,
            "empty command template".into(),
        );
    };
    let out_dir = workspace.join("out");
    let _ = std::fs::create_dir_all(&out_dir);
    let (stdout_path, stderr_path) = (out_dir.join("stdout.txt"), out_dir.join("stderr.txt"));
    let files = std::fs::File::create(&stdout_path)
        .and_then(|o| std::fs::File::create(&stderr_path).map(|e| (o, e)));
    let (o, e) = match files {
        Ok(f) => f,
        Err(err) => return done(false, ExitKind::ToolError, err.to_string()),
    };
    let child = Command::new(prog)
        .args(args)
        .current_dir(workspace)
        .stdin(Stdio::null())
        .stdout(o)
        .stderr(e)
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
            return done(false, ExitKind::NotInstalled, format!("{prog}: not found"))
        }
        Err(err) => return done(false, ExitKind::ToolError, err.to_string()),
    };
    let limit = Duration::from_secs_f64(timeout_s.max(0.0));
    let status = match child.wait_timeout(limit) {
        Ok(Some(s)) => Some(s),
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            None
        }
        Err(err) => return done(false, ExitKind::ToolError, err.to_string()),
    };
    let mut digest = std::fs::read_to_string(&stdout_path).unwrap_or_default();
    digest.push_str(&std::fs::read_to_string(&stderr_path).unwrap_or_default());
    match status {
        None => done(false, ExitKind::Timeout, digest),
        Some(s) if s.success() => done(true, ExitKind::Success, digest),
        Some(_) => done(false, ExitKind::ToolError, digest),
    }
}
