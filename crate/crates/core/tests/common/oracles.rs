//! Reference implementations written without reference to the library.

/// Least-squares nondecreasing fit by the min-max formula:
/// `ŷ_i = max_{j ≤ i} min_{k ≥ i} mean(y[j..=k])`.
pub fn isotonic_minmax(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + y[i];
    }
    let mean = |j: usize, k: usize| (prefix[k + 1] - prefix[j]) / (k + 1 - j) as f64;
    (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| (i..n).map(|k| mean(j, k)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Fraction of size-`k` subsets of `f` trials (the first `c` correct) that
/// contain a correct one, by enumerating bitmasks.
pub fn pass_at_k_enumerated(f: usize, c: usize, k: usize) -> f64 {
    let mut hit = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1u32 << f) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        if mask & ((1u32 << c) - 1) != 0 {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

/// Smallest sample `x` with at least `p`% of the samples at or below it.
pub fn nearest_rank_scan(samples: &[f64], p: usize) -> f64 {
    let n = samples.len();
    let mut best = f64::INFINITY;
    for &x in samples {
        let at_or_below = samples.iter().filter(|&&s| s <= x).count();
        if at_or_below * 100 >= p * n && x < best {
            best = x;
        }
    }
    best
}

/// Mean logistic loss plus `λ Σ w_i²` over the non-bias weights.
pub fn logistic_loss(theta: &[f64; 6], rows: &[([f64; 5], bool)], lambda: f64) -> f64 {
    let mut total = 0.0;
    for (x, y) in rows {
        let z = theta[0] + (0..5).map(|i| theta[i + 1] * x[i]).sum::<f64>();
        let p = 1.0 / (1.0 + (-z).exp());
        total -= if *y { p.ln() } else { (1.0 - p).ln() };
    }
    total / rows.len() as f64 + lambda * theta[1..].iter().map(|w| w * w).sum::<f64>()
}
