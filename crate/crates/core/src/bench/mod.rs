//! Bug-injection corpus, benchmark runner and metrics.

mod inject;
mod metrics;
mod runner;

pub use inject::{inject, site_count, BugClass, BugSpec, InjectError, Mutant};
pub use metrics::{
    latency_stats, mean_pass_at_k, nearest_rank, pass_at_k, LatencyStats, MetricError,
};
pub use runner::{
    build_corpus, run_bug_benchmark, run_instance, BenchConfig, BenchInstance, BenchReport,
    BenchRow, CorpusError, GoldenTask, InstanceResult, OracleRepair, StageLatency, CSV_HEADER,
    REPORT_SCHEMA,
};
