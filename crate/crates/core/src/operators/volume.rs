//! Monte Carlo volumes of operator balls in `R^{n²}`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nets::op_norm;
use crate::error::{GlabError, Result};
use crate::polytope::{facets::enumerate_facets, VPolytope};
use crate::report::EstimateReport;
use crate::rng::{count_trials, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorVolumeReport {
    pub n: usize,
    pub estimate: EstimateReport,
    /// Exact value when one is known (`vol(B)^n` for `V_B`).
    pub expected: Option<f64>,
    pub relative_error: Option<f64>,
    /// `vol^{1/n²} √n`, the constant in the volume law of `V_op`.
    pub implied_c2: Option<f64>,
}

/// Hit-or-miss `vol_{n²}(V_B^n)` with `T` uniform in a box containing the ball, compared with
/// `vol_n(B)^n`.
pub fn operator_ball_volume_check(b: &VPolytope, trials: usize, seed: RngSeed) -> Result<OperatorVolumeReport> {
    let n = b.n;
    if n > 3 {
        return Err(GlabError::UnsupportedDimension(n, "operator-ball volume needs n <= 3".into()));
    }
    let facets = enumerate_facets(n, &b.generators)?;
    let extent: Vec<f64> = (0..n).map(|i| b.generator_rows().fold(0.0f64, |a, g| a.max(g[i].abs()))).collect();
    let box_vol = extent.iter().map(|r| 2.0 * r).product::<f64>().powi(n as i32);
    let hits = count_trials(trials, |i| {
        let mut rng = seed.trial(i).rng();
        let mut col = vec![0.0; n];
        (0..n).all(|_| {
            col.iter_mut().zip(&extent).for_each(|(x, &r)| *x = rng.gen_range(-r..=r));
            facets.gauge(&col) <= 1.0
        })
    });
    // the columns are drawn lazily; a rejected column skips the rest, which only changes how many
    // numbers are consumed, not the hit probability
    let est = EstimateReport::wilson(hits, trials, seed, "operator_ball_hit_or_miss").scaled(box_vol);
    let expected = facets.volume.powi(n as i32);
    Ok(OperatorVolumeReport {
        n,
        relative_error: Some((est.value - expected).abs() / expected),
        expected: Some(expected),
        estimate: est,
        implied_c2: None,
    })
}

/// Hit-or-miss `vol_{n²}(V_op^n)` in the cube `[-1, 1]^{n²}`.
pub fn vop_volume_check(n: usize, trials: usize, seed: RngSeed) -> Result<OperatorVolumeReport> {
    if n == 0 || n > 3 {
        return Err(GlabError::UnsupportedDimension(n, "V_op volume needs 1 <= n <= 3".into()));
    }
    let hits = count_trials(trials, |i| {
        let mut rng = seed.trial(i).rng();
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
        op_norm(&m) <= 1.0
    });
    let d = (n * n) as f64;
    let est = EstimateReport::wilson(hits, trials, seed, "vop_hit_or_miss").scaled(2f64.powf(d));
    let c2 = est.value.powf(1.0 / d) * (n as f64).sqrt();
    Ok(OperatorVolumeReport { n, estimate: est, expected: None, relative_error: None, implied_c2: Some(c2) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_vop_is_the_interval() {
        let r = vop_volume_check(1, 1000, RngSeed::new(0)).unwrap();
        assert_eq!(r.estimate.value, 2.0);
    }

    #[test]
    fn square_operator_ball_fills_its_box() {
        let sq = VPolytope::new(2, vec![1.0, 1.0, 1.0, -1.0], "square").unwrap();
        let r = operator_ball_volume_check(&sq, 1000, RngSeed::new(0)).unwrap();
        assert_eq!(r.estimate.value, 16.0);
    }
}
