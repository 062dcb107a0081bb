//! Adapters for the compile, lint, official-testbench and formal actions.
//! Each action runs either the built-in implementation or an external
//! command line, chosen per action in [`ToolsConfig`].

mod compile;
mod config;
mod lint;
mod process;
mod testbench;
mod workspace;

use std::io;
use std::path::PathBuf;

pub use compile::{
    compile, compile_builtin, parse_tool_messages, CompileReport, Message, Severity,
};
pub use config::{ActionConfig, ToolMode, ToolsConfig, RUN_ROOT_ENV};
pub use lint::{
    lint, lint_builtin, parse_lint_output, LintReport, LintWarning, RULE_BLOCKING_CLOCKED,
    RULE_CASE_DEFAULT, RULE_LATCH, RULE_UNUSED, RULE_WIDTH,
};
pub use process::{expand_argv, run_external, ExitKind, ToolResult};
pub use testbench::{
    parse_testbench, run_official, run_testbench, Expectation, OfficialRunResult, TbValue,
    Testbench, TestbenchError, DEFAULT_WAVE_WINDOW,
};
pub use workspace::make_workspace;

/// Identifies the task and attempt an adapter call belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub task: String,
    pub attempt: String,
}

/// Files of one prepared run directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dir: PathBuf,
    pub src: PathBuf,
    pub tb: PathBuf,
    pub out: PathBuf,
}

impl Job {
    pub fn new(task: impl Into<String>, attempt: impl Into<String>) -> Self {
        Job {
            task: task.into(),
            attempt: attempt.into(),
        }
    }

    /// Creates a fresh workspace and writes `src.v` (and `tb.v` if given).
    pub fn prepare(&self, cfg: &ToolsConfig, src: &str, tb: Option<&str>) -> io::Result<Workspace> {
        let dir = make_workspace(&cfg.resolved_run_root(), &self.task, &self.attempt)?;
        let ws = Workspace {
            src: dir.join("src.v"),
            tb: dir.join("tb.v"),
            out: dir.join("out"),
            dir,
        };
        std::fs::write(&ws.src, src)?;
        if let Some(tb) = tb {
            std::fs::write(&ws.tb, tb)?;
        }
        Ok(ws)
    }
}

impl Default for Job {
    fn default() -> Self {
        Job::new("adhoc", "0")
    }
}
