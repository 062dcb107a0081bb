use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "hdlforge",
    version,
    about = "Two-stage Verilog generation with calibrated escalation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Hyperparameter flags. A flag beats the `--config` file, which beats the
/// built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Escalation threshold.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Stage-A attempt budget.
    #[arg(long, global = true)]
    pub r: Option<usize>,
    /// Plans per task.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Candidates per plan.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Bounded-check depth.
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Suspect-cone depth.
    #[arg(long, global = true)]
    pub dmax: Option<usize>,
    /// Smoke-test cycle cap.
    #[arg(long, global = true)]
    pub wsmoke: Option<usize>,
    /// Lint saturation count.
    #[arg(long, global = true)]
    pub llint: Option<usize>,
    /// Slice line cap.
    #[arg(long, global = true)]
    pub lmax: Option<usize>,
    /// Trace-stability horizon in cycles.
    #[arg(long, global = true)]
    pub dtwave: Option<usize>,
    /// Concurrent candidate checks (default n*m).
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// L2 strength for calibration (default: cross-validated).
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run configuration JSON.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Escalation-score weights JSON.
    #[arg(long, global = true, value_name = "JSON")]
    pub weights: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run episodes on task directories (or directories of tasks).
    Run {
        #[arg(required = true)]
        tasks: Vec<PathBuf>,
    },
    /// Fit escalation weights from episode logs or a labeled dataset.
    Calibrate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Replay recorded logs under a grid of thresholds.
    Sweep {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7])]
        grid: Vec<f64>,
    },
    /// Bug-injection benchmark over a corpus of golden tasks.
    Bench {
        corpus: PathBuf,
        /// Arms to run.
        #[arg(long, value_delimiter = ',', default_values = ["with-microtests", "without-microtests", "wrapped-external"])]
        configs: Vec<String>,
        /// Mutants per bug class.
        #[arg(long, default_value_t = 5)]
        per_class: usize,
    },
    /// Run an external Stage-A generator under the controller.
    Wrap {
        #[arg(required = true)]
        tasks: Vec<PathBuf>,
        /// Adapter command line, after `--`.
        #[arg(last = true, required = true)]
        adapter: Vec<String>,
    },
    /// Summarize recorded episode logs.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
}
