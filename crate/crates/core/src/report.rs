//! Monte Carlo estimate records shared by every statistical operation.

use serde::{Deserialize, Serialize};

use crate::rng::RngSeed;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
    pub seed: RngSeed,
    pub method: String,
}

impl EstimateReport {
    /// Binomial proportion `hits / trials` with its Wilson 95% interval.
    pub fn wilson(hits: usize, trials: usize, seed: RngSeed, method: impl Into<String>) -> Self {
        let (lo, hi) = wilson_interval(hits, trials);
        let p = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        EstimateReport { value: p, ci_low: lo.min(p), ci_high: hi.max(p), trials, seed, method: method.into() }
    }

    /// Mean with a normal-approximation 95% interval from a sum and sum of squares.
    pub fn from_moments(sum: f64, sum_sq: f64, trials: usize, seed: RngSeed, method: impl Into<String>) -> Self {
        let nf = trials.max(1) as f64;
        let mean = sum / nf;
        let var = if trials > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        let half = Z95 * (var / nf).sqrt();
        EstimateReport {
            value: mean,
            ci_low: mean - half,
            ci_high: mean + half,
            trials,
            seed,
            method: method.into(),
        }
    }

    /// Multiplies value and interval by a nonnegative constant.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.ci_low *= factor;
        self.ci_high *= factor;
        self
    }

    /// Applies a nondecreasing map to value and interval.
    pub fn mapped(mut self, f: impl Fn(f64) -> f64) -> Self {
        self.value = f(self.value);
        self.ci_low = f(self.ci_low);
        self.ci_high = f(self.ci_high);
        self
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Wilson score interval at 95% for `hits` successes out of `trials`.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// An estimate compared against a theoretical bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub label: String,
    pub estimate: EstimateReport,
    pub bound: f64,
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_proportion() {
        for &(h, n) in &[(0, 10), (10, 10), (3, 7), (500, 1000), (1, 1_000_000)] {
            let r = EstimateReport::wilson(h, n, RngSeed::new(0), "t");
            assert!(r.ci_low <= r.value && r.value <= r.ci_high, "{h}/{n}");
        }
    }

    #[test]
    fn wilson_known_value() {
        // 50/100: center 0.5, half-width 1.96*sqrt(.25/100)/(1+z^2/100) adjusted
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_831).abs() < 1e-5);
        assert!((hi - 0.596_169).abs() < 1e-5);
    }
}
