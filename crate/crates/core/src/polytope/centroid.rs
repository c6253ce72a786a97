//! Support values of `L_p`-centroid bodies and the inclusions they satisfy.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::support_function;
use crate::error::{invalid, Result};
use crate::linalg::{dot, random_unit};
use crate::report::EstimateReport;
use crate::rng::{map_trials, RngSeed};
use crate::sampling::{DistributionSpec, SampleSet, TrialPoints};

const BATCHES: usize = 20;

pub enum ZpSource<'a> {
    Spec(&'a DistributionSpec),
    Samples(&'a SampleSet),
}

/// Mean of `values` with a batch-means t interval.
fn batch_mean(values: &[f64]) -> (f64, f64, f64) {
    let t = values.len();
    let mean = values.iter().sum::<f64>() / t as f64;
    let b = BATCHES.min(t / 2);
    if b < 2 {
        return (mean, mean, mean);
    }
    let size = t / b;
    let means: Vec<f64> = (0..b).map(|i| values[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let mm = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (b - 1) as f64;
    let q = StudentsT::new(0.0, 1.0, (b - 1) as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(2.0);
    let half = q * (var / b as f64).sqrt();
    (mean, (mean - half).min(mean), (mean + half).max(mean))
}

/// Monte Carlo `h_{Z_p}(y) = (E|<x, y>|^p)^{1/p}`.
pub fn zp_support_estimate(source: ZpSource, y: &[f64], p: f64, trials: usize, seed: RngSeed) -> Result<EstimateReport> {
    if !(p >= 1.0) {
        return invalid(format!("p = {p} must be >= 1"));
    }
    let values: Vec<f64> = match source {
        ZpSource::Spec(spec) => {
            if y.len() != spec.n {
                return invalid("direction has the wrong dimension");
            }
            if trials == 0 {
                return invalid("trials must be positive");
            }
            let src = TrialPoints::new(spec, trials, seed)?;
            map_trials(trials, |i| {
                let mut x = vec![0.0; spec.n];
                src.point(i, &mut x);
                dot(&x, y).abs().powf(p)
            })
        }
        ZpSource::Samples(s) => {
            if y.len() != s.n {
                return invalid("direction has the wrong dimension");
            }
            s.rows().map(|x| dot(x, y).abs().powf(p)).collect()
        }
    };
    let (mean, lo, hi) = batch_mean(&values);
    let inv = 1.0 / p;
    Ok(EstimateReport {
        value: mean.powf(inv),
        ci_low: lo.max(0.0).powf(inv),
        ci_high: hi.powf(inv),
        trials: values.len(),
        seed,
        method: format!("zp_support(p={p}, batch_means)"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZpInclusionReport {
    pub p: f64,
    pub q: f64,
    pub c: f64,
    pub directions: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `c q / p`.
    pub upper_bound: f64,
    pub monotonicity_violations: usize,
    pub upper_violations: usize,
    pub pass: bool,
}

/// Checks `h_{Z_p} <= h_{Z_q} <= (c q / p) h_{Z_p}` over random directions. Both moments use the
/// same points, so the left inclusion holds exactly for the empirical measure.
pub fn zp_inclusion_check(
    spec: &DistributionSpec,
    p: f64,
    q: f64,
    c: f64,
    directions: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<ZpInclusionReport> {
    if !(p >= 1.0 && p < q) {
        return invalid(format!("need 1 <= p < q (got p = {p}, q = {q})"));
    }
    if trials == 0 || directions == 0 {
        return invalid("trials and directions must be positive");
    }
    let n = spec.n;
    let src = TrialPoints::new(spec, trials, seed)?;
    let pts: Vec<Vec<f64>> = map_trials(trials, |i| {
        let mut x = vec![0.0; n];
        src.point(i, &mut x);
        x
    });
    let mut rng = seed.derive(2).rng();
    let upper = c * q / p;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let (mut mono, mut up) = (0, 0);
    for _ in 0..directions {
        let u = random_unit(&mut rng, n);
        let (mut sp, mut sq) = (0.0, 0.0);
        for x in &pts {
            let a = dot(x, &u).abs();
            sp += a.powf(p);
            sq += a.powf(q);
        }
        let hp = (sp / trials as f64).powf(1.0 / p);
        let hq = (sq / trials as f64).powf(1.0 / q);
        let r = hq / hp;
        lo = lo.min(r);
        hi = hi.max(r);
        if r < 1.0 - 1e-12 {
            mono += 1;
        }
        if r > upper {
            up += 1;
        }
    }
    Ok(ZpInclusionReport {
        p,
        q,
        c,
        directions,
        min_ratio: lo,
        max_ratio: hi,
        upper_bound: upper,
        monotonicity_violations: mono,
        upper_violations: up,
        pass: mono == 0 && up == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgtReport {
    pub q: f64,
    pub c1: f64,
    pub directions: usize,
    /// Fraction of directions with `h_{B_m}(u) < c1 ĥ_{Z_q}(u)`.
    pub failure_fraction: f64,
    /// Largest `c1` that would pass in every sampled direction.
    pub max_passing_c1: f64,
}

/// Checks `h_{B_m}(u) >= c1 ĥ_{Z_q}(u)`, `q = ln(1 + m/n)`, with `B_m = absconv(samples)`.
///
/// `ĥ_{Z_q}` is estimated from `reference`, an independent sample of the same law; estimating it
/// from the vertices themselves would make the inclusion hold trivially.
pub fn dgt_inclusion_check(
    samples: &SampleSet,
    reference: &SampleSet,
    c1: f64,
    directions: usize,
    seed: RngSeed,
) -> Result<DgtReport> {
    if samples.m < samples.n {
        return invalid(format!("need m >= n (m = {}, n = {})", samples.m, samples.n));
    }
    if reference.n != samples.n {
        return invalid("reference sample has a different dimension");
    }
    let q = (1.0 + samples.m as f64 / samples.n as f64).ln();
    let body = super::build_pure(samples);
    let mut rng = seed.rng();
    let mut fails = 0;
    let mut best = f64::INFINITY;
    for _ in 0..directions {
        let u = random_unit(&mut rng, samples.n);
        let h = support_function(&body, &u);
        let zq = (reference.rows().map(|x| dot(x, &u).abs().powf(q)).sum::<f64>() / reference.m as f64).powf(1.0 / q);
        if h < c1 * zq {
            fails += 1;
        }
        best = best.min(h / zq);
    }
    Ok(DgtReport {
        q,
        c1,
        directions,
        failure_fraction: fails as f64 / directions.max(1) as f64,
        max_passing_c1: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoelder_monotone_with_common_points() {
        let r = zp_inclusion_check(&DistributionSpec::gaussian(3), 1.0, 2.0, 2.0, 20, 5000, RngSeed::new(3)).unwrap();
        assert_eq!(r.monotonicity_violations, 0);
        assert!((r.min_ratio - 1.2533).abs() < 0.05 && (r.max_ratio - 1.2533).abs() < 0.05);
    }

    #[test]
    fn zero_c1_is_vacuous() {
        let s = crate::sampling::sample(&DistributionSpec::gaussian(4), 8, RngSeed::new(1)).unwrap();
        let r = crate::sampling::sample(&DistributionSpec::gaussian(4), 500, RngSeed::new(2)).unwrap();
        let d = dgt_inclusion_check(&s, &r, 0.0, 50, RngSeed::new(3)).unwrap();
        assert_eq!(d.failure_fraction, 0.0);
        assert_eq!(d.q, 3f64.ln());
    }
}
