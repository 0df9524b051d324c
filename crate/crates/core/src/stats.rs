//! Interval estimates for Monte Carlo counts.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// An event count out of a number of trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proportion {
    pub count: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(count: u64, trials: u64) -> Self {
        debug_assert!(count <= trials);
        Self { count, trials }
    }

    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.count as f64 / self.trials as f64
        }
    }

    /// Wilson score interval at 95%.
    pub fn wilson95(&self) -> (f64, f64) {
        wilson(self.count, self.trials, Z95)
    }

    pub fn half_width95(&self) -> f64 {
        let (lo, hi) = self.wilson95();
        0.5 * (hi - lo)
    }
}

/// Wilson score interval for `count` successes in `trials`.
pub fn wilson(count: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Running sums for the ratio estimator `sum(a) / sum(b)` over nonnegative
/// integer pairs. Integer moments keep merging order-independent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioMoments {
    pub n: u64,
    pub sum_a: u128,
    pub sum_b: u128,
    pub sum_aa: u128,
    pub sum_ab: u128,
    pub sum_bb: u128,
}

impl RatioMoments {
    pub fn push(&mut self, a: u64, b: u64) {
        let (a, b) = (a as u128, b as u128);
        self.n += 1;
        self.sum_a += a;
        self.sum_b += b;
        self.sum_aa += a * a;
        self.sum_ab += a * b;
        self.sum_bb += b * b;
    }

    pub fn merge(&mut self, o: &Self) {
        self.n += o.n;
        self.sum_a += o.sum_a;
        self.sum_b += o.sum_b;
        self.sum_aa += o.sum_aa;
        self.sum_ab += o.sum_ab;
        self.sum_bb += o.sum_bb;
    }

    pub fn ratio(&self) -> f64 {
        if self.sum_b == 0 {
            0.0
        } else {
            self.sum_a as f64 / self.sum_b as f64
        }
    }

    /// 95% half-width by the delta method.
    pub fn half_width95(&self) -> f64 {
        if self.n < 2 || self.sum_b == 0 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let r = self.ratio();
        // sum (a - r b)^2; the mean of a - r b is zero by construction.
        let ss = self.sum_aa as f64 - 2.0 * r * self.sum_ab as f64 + r * r * self.sum_bb as f64;
        let var = (ss / (n - 1.0)).max(0.0);
        let mean_b = self.sum_b as f64 / n;
        Z95 * (var / n).sqrt() / mean_b
    }
}
