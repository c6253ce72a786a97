use crate::error::{invalid, Result};
use crate::operators::LinearMap;
use crate::polytope::{GaugeOracle, VPolytope};
use crate::report::{BoundCheck, EstimateReport};
use crate::rng::{count_trials_with, RngSeed};
use crate::sampling::{DistributionSpec, TrialPoints};

/// `γ = 1 / (C₅ b √ln(1 + m/n))`.
pub fn gluskin_gamma(c5: f64, b: f64, m: usize, n: usize) -> f64 {
    1.0 / (c5 * b * (1.0 + m as f64 / n as f64).ln().sqrt())
}

/// Empirical `μ{x : T x ∈ γ√n B0}` against `e^{-k}`.
pub fn fixed_operator_smallprob_check(
    spec: &DistributionSpec,
    t: &LinearMap,
    b0: &VPolytope,
    gamma: f64,
    k: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<BoundCheck> {
    let n = spec.n;
    if t.n != n || b0.n != n {
        return invalid("dimensions of law, map and body differ");
    }
    if k == 0 || k > n {
        return invalid(format!("k = {k} must lie in [1, n]"));
    }
    if t.s(k) < 1.0 - 1e-12 {
        return invalid(format!("s_k(T) = {} < 1", t.s(k)));
    }
    if !(gamma > 0.0) {
        return invalid("gamma must be positive");
    }
    let radius = gamma * (n as f64).sqrt();
    let src = TrialPoints::new(spec, trials, seed)?;
    let oracle = GaugeOracle::new(b0)?;
    let hits = count_trials_with(trials, &oracle, |o, i| {
        let mut x = vec![0.0; n];
        src.point(i, &mut x);
        matches!(o.norm_above(&t.apply(&x), radius), Ok(None))
    });
    let est = EstimateReport::wilson(hits, trials, seed, "fixed_operator_small_probability");
    let bound = (-(k as f64)).exp();
    Ok(BoundCheck { label: format!("gamma={gamma},k={k}"), pass: est.ci_high <= bound, estimate: est, bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_small_gamma_passes_and_huge_gamma_fails() {
        let spec = DistributionSpec::gaussian(8);
        let b0 = VPolytope::cross_polytope(8);
        let t = LinearMap::identity(8);
        let small = fixed_operator_smallprob_check(&spec, &t, &b0, 0.3, 4, 5000, RngSeed::new(1)).unwrap();
        assert!(small.pass, "{:?}", small.estimate);
        let big = fixed_operator_smallprob_check(&spec, &t, &b0, 100.0, 4, 2000, RngSeed::new(1)).unwrap();
        assert!(!big.pass);
        assert_eq!(big.estimate.value, 1.0);
    }
}
