use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("pass@k needs 0 <= c <= f and 1 <= k <= f (got f={f}, c={c}, k={k})")]
    Domain { f: usize, c: usize, k: usize },
    #[error("no samples")]
    Empty,
}

/// `1 - C(f-c, k) / C(f, k)` as a running product, so large `f` cannot
/// overflow.
pub fn pass_at_k(f: usize, c: usize, k: usize) -> Result<f64, MetricError> {
    if c > f || k == 0 || k > f {
        return Err(MetricError::Domain { f, c, k });
    }
    if f - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0;
    for i in (f - c + 1)..=f {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

/// Mean of per-problem pass@k over `(f, c)` pairs.
pub fn mean_pass_at_k(problems: &[(usize, usize)], k: usize) -> Result<f64, MetricError> {
    if problems.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut sum = 0.0;
    for &(f, c) in problems {
        sum += pass_at_k(f, c, k)?;
    }
    Ok(sum / problems.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
    pub p95: f64,
}

/// The `ceil(p·n)`-th smallest sample (1-based), `p` in percent.
pub fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    let n = sorted.len();
    let rank = (percent * n).div_ceil(100).clamp(1, n);
    sorted[rank - 1]
}

pub fn latency_stats(samples: &[f64]) -> Result<LatencyStats, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        median: nearest_rank(&s, 50),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        p90: nearest_rank(&s, 90),
        p95: nearest_rank(&s, 95),
    })
}
