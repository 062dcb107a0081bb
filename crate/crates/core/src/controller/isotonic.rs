use serde::{Deserialize, Serialize};

/// Nondecreasing step function: `y[i]` holds on `[x[i], x[i+1])`, clamped to
/// `y[0]` below `x[0]` and to the last level above the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl IsotonicMap {
    pub fn eval(&self, z: f64) -> f64 {
        if self.x.is_empty() {
            return z;
        }
        let i = self.x.partition_point(|&b| b <= z);
        self.y[i.saturating_sub(1)]
    }
}

/// Pool-adjacent-violators on `(score, label)` points. Equal scores are pooled
/// first so the map is a function of the score.
pub fn fit_isotonic(points: &[(f64, f64)]) -> IsotonicMap {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(s, _)| s.is_finite())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // (first x, sum, weight)
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for (s, y) in pts {
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                g.1 += y;
                g.2 += 1.0;
            }
            _ => groups.push((s, y, 1.0)),
        }
    }
    let mut blocks: Vec<(f64, f64, f64)> = Vec::with_capacity(groups.len());
    for g in groups {
        blocks.push(g);
        while blocks.len() >= 2 {
            let n = blocks.len();
            let (a, b) = (blocks[n - 2], blocks[n - 1]);
            if a.1 / a.2 <= b.1 / b.2 {
                break;
            }
            blocks[n - 2] = (a.0, a.1 + b.1, a.2 + b.2);
            blocks.pop();
        }
    }
    IsotonicMap {
        x: blocks.iter().map(|b| b.0).collect(),
        y: blocks.iter().map(|b| (b.1 / b.2).clamp(0.0, 1.0)).collect(),
    }
}
