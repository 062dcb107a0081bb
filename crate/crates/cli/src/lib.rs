//! Library half of the `hdlforge` binary, so the commands can be driven from
//! tests without spawning a process.

pub mod args;
mod commands;
mod summary;

use std::path::Path;

use hdlforge::config::RunConfig;
use hdlforge::controller::ScoreModel;

pub use args::{Cli, Command, Overrides};
pub use summary::{RunSummary, TaskRecord, SUMMARY_SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("adapter protocol: {0}")]
    Adapter(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Adapter(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Defaults, then the `--config` file, then flags.
pub fn resolve_config(o: &Overrides) -> Result<RunConfig, CliError> {
    let mut c = match &o.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),* $(,)?) => {
            $(if let Some(v) = o.$flag { c.$field = v; })*
        };
    }
    set!(tau => tau, r => r, n => n, m => m, d => d, dmax => d_max, wsmoke => w_smoke,
         llint => l_lint, lmax => l_max, dtwave => dt_wave, jobs => jobs, seed => seed);
    if o.batch.is_some() {
        c.batch = o.batch;
    }
    if o.lambda.is_some() {
        c.lambda = o.lambda;
    }
    if o.out.is_some() {
        c.out = o.out.clone();
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}

/// The `--weights` file, or the built-in prior.
pub fn load_model(o: &Overrides) -> Result<ScoreModel, CliError> {
    match &o.weights {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            ScoreModel::from_json(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(ScoreModel::default()),
    }
}

/// Runs a parsed command line, printing to stdout; returns the exit code.
pub fn execute(cli: &Cli) -> i32 {
    let mut stdout = std::io::stdout().lock();
    match commands::dispatch(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hdlforge: {e}");
            e.exit_code()
        }
    }
}

/// Like [`execute`], but writing into `out` and returning the error.
pub fn execute_to(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    commands::dispatch(cli, out)
}
