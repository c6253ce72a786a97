use serde::{Deserialize, Serialize};

use crate::error::{invalid, GlabError, Result};
use crate::linalg::random_unit;
use crate::lp::{solve_lp, LpProblem, LpStatus, VarBound};
use crate::polytope::{build_pure, facets::enumerate_facets, support_function, GaugeOracle, HPolytope, VPolytope};
use crate::report::EstimateReport;
use crate::rng::{count_trials, count_trials_with, moment_trials, RngSeed};
use crate::sampling::{sample, unit_ball_volume, DistributionSpec, SampleSet};

#[derive(Debug, Clone, Copy)]
pub enum Body<'a> {
    V(&'a VPolytope),
    H(&'a HPolytope),
}

impl Body<'_> {
    fn n(&self) -> usize {
        match self {
            Body::V(p) => p.n,
            Body::H(h) => h.n,
        }
    }
}

/// Uniform point in the ball of radius `r`, from the trial stream.
fn ball_point(seed: RngSeed, i: u64, n: usize, r: f64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = seed.trial(i).rng();
    let u = random_unit(&mut rng, n);
    let rad = r * rng.gen::<f64>().powf(1.0 / n as f64);
    u.into_iter().map(|x| x * rad).collect()
}

/// Hit-or-miss volume inside `bounding_radius · B_2^n`, with a Wilson interval.
pub fn volume_mc(body: Body, bounding_radius: f64, trials: usize, seed: RngSeed) -> Result<EstimateReport> {
    if trials == 0 {
        return invalid("trials must be positive");
    }
    let n = body.n();
    let ball = unit_ball_volume(n) * bounding_radius.powi(n as i32);
    let hits = match body {
        Body::V(p) => {
            let needed = p.circumradius();
            if needed > bounding_radius * (1.0 + 1e-12) {
                return Err(GlabError::InvalidBound { radius: bounding_radius, needed });
            }
            let oracle = GaugeOracle::new(p)?;
            count_trials_with(trials, &oracle, |o, i| {
                let z = ball_point(seed, i, n, bounding_radius);
                matches!(o.norm_above(&z, 1.0), Ok(None))
            })
        }
        Body::H(h) => count_trials(trials, |i| h.gauge(&ball_point(seed, i, n, bounding_radius)) <= 1.0),
    };
    Ok(EstimateReport::wilson(hits, trials, seed, "hit_or_miss_ball").scaled(ball))
}

/// Exact volume for `n <= 3`: fan of pyramids over the facets.
pub fn volume_exact_lowdim(body: &VPolytope) -> Result<f64> {
    if body.n > 3 {
        return Err(GlabError::UnsupportedDimension(body.n, "exact volume needs n <= 3".into()));
    }
    Ok(enumerate_facets(body.n, &body.generators)?.volume)
}

/// Exact when `n <= 3`, otherwise hit-or-miss in the circumscribed ball.
pub fn body_volume(body: &VPolytope, trials: usize, seed: RngSeed) -> Result<f64> {
    if body.n <= 3 {
        return volume_exact_lowdim(body);
    }
    Ok(volume_mc(Body::V(body), body.circumradius(), trials, seed)?.value)
}

/// Radius of a ball containing `P°`: the half-diagonal of its bounding box, one LP per axis.
pub fn polar_bounding_radius(p: &VPolytope) -> Result<f64> {
    if !p.full_dimensional {
        return Err(GlabError::UnboundedPolar);
    }
    let n = p.n;
    let mut sq = 0.0;
    for i in 0..n {
        let mut obj = vec![0.0; n];
        obj[i] = -1.0;
        let mut lp = LpProblem::new(obj);
        lp.bounds = vec![VarBound::Free; n];
        for g in p.generator_rows() {
            lp.add_le(g.to_vec(), 1.0);
            lp.add_le(g.iter().map(|x| -x).collect(), 1.0);
        }
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(GlabError::UnboundedPolar);
        }
        sq += sol.objective_value * sol.objective_value;
    }
    Ok(sq.sqrt() * (1.0 + 1e-9))
}

/// Volume of `P°`: exact via facets for `n <= 3`, otherwise hit-or-miss.
pub fn polar_volume(p: &VPolytope, trials: usize, seed: RngSeed) -> Result<f64> {
    if p.n <= 3 {
        return volume_exact_lowdim(&crate::polytope::polar_vertices(p)?);
    }
    let h = crate::polytope::polar(p)?;
    let r = polar_bounding_radius(p)?;
    Ok(volume_mc(Body::H(&h), r, trials, seed)?.value)
}

/// `w(P) = ∫ h_P dσ`, averaged over uniform directions.
pub fn mean_width(p: &VPolytope, directions: usize, seed: RngSeed) -> Result<EstimateReport> {
    if directions == 0 {
        return invalid("directions must be positive");
    }
    let (s, s2) = moment_trials(directions, |i| {
        let u = random_unit(&mut seed.trial(i).rng(), p.n);
        support_function(p, &u)
    });
    Ok(EstimateReport::from_moments(s, s2, directions, seed, "mean_width_sphere_average"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub m: usize,
    pub volume: EstimateReport,
    /// `vol(B_m)^{1/n} √n / √ln(1 + m/n)`.
    pub normalized: EstimateReport,
}

/// Volume radius of the pure-model `B_m` for each `m`, normalised by `√ln(1+m/n) / √n`.
pub fn volume_radius_profile(
    spec: &DistributionSpec,
    m_list: &[usize],
    trials_per_point: usize,
    seed: RngSeed,
) -> Result<Vec<ProfileRow>> {
    let n = spec.n;
    if n > 6 {
        return Err(GlabError::UnsupportedDimension(n, "volume profile needs n <= 6".into()));
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) || m_list.is_empty() {
        return invalid("m_list must be nonempty and strictly ascending");
    }
    let mut rows = Vec::with_capacity(m_list.len());
    for (idx, &m) in m_list.iter().enumerate() {
        let s = sample(spec, m, seed.derive(idx as u64))?;
        let b = build_pure(&s);
        if !b.full_dimensional {
            return Err(GlabError::DegenerateSample(format!("m = {m} points do not span R^{n}")));
        }
        let exact = if n <= 3 {
            match volume_exact_lowdim(&b) {
                Ok(v) => Some(v),
                Err(GlabError::UnsupportedDimension(..)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let vol = match exact {
            Some(v) => EstimateReport { value: v, ci_low: v, ci_high: v, trials: 1, seed, method: "exact_facets".into() },
            None => volume_mc(Body::V(&b), b.circumradius(), trials_per_point, seed.derive(1000 + idx as u64))?,
        };
        let factor = (n as f64).sqrt() / (1.0 + m as f64 / n as f64).ln().sqrt();
        let normalized = vol.clone().mapped(|v| v.max(0.0).powf(1.0 / n as f64) * factor);
        rows.push(ProfileRow { m, volume: vol, normalized });
    }
    Ok(rows)
}

/// Max over min of the normalised column.
pub fn profile_spread(rows: &[ProfileRow]) -> f64 {
    let vals: Vec<f64> = rows.iter().map(|r| r.normalized.value).collect();
    vals.iter().cloned().fold(0.0, f64::max) / vals.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarVolumeReport {
    pub n: usize,
    pub vol_body: f64,
    pub vol_polar: f64,
    pub product: f64,
    /// `ω_n²`, the Santaló maximum.
    pub omega_sq: f64,
    pub ratio: f64,
    /// `cⁿ`, the lower end of the accepted band for the ratio.
    pub lower: f64,
    pub pass: bool,
}

/// `vol(B_m) vol(B_m°)` against `[cⁿ ω_n², ω_n²]` for the pure-model body of `samples`.
pub fn polar_volume_check(samples: &SampleSet, c: f64, trials: usize, seed: RngSeed) -> Result<PolarVolumeReport> {
    let n = samples.n;
    if n > 4 {
        return Err(GlabError::UnsupportedDimension(n, "polar volume check needs n <= 4".into()));
    }
    let b = build_pure(samples);
    if !b.full_dimensional {
        return Err(GlabError::UnboundedPolar);
    }
    let vol_body = body_volume(&b, trials, seed.derive(1))?;
    let vol_polar = polar_volume(&b, trials, seed.derive(2))?;
    let omega = unit_ball_volume(n);
    let product = vol_body * vol_polar;
    let ratio = product / (omega * omega);
    let lower = c.powi(n as i32);
    // hit-or-miss noise can push an exact maximiser slightly above 1
    let upper_slack = if n <= 3 { 1e-9 } else { 0.05 };
    Ok(PolarVolumeReport {
        n,
        vol_body,
        vol_polar,
        product,
        omega_sq: omega * omega,
        ratio,
        lower,
        pass: ratio >= lower && ratio <= 1.0 + upper_slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfReport {
    pub k: usize,
    pub m: usize,
    pub r: f64,
    pub volume: f64,
    /// `vol(Q)^{1/k} √k / (r √ln(1 + m/k))`.
    pub ratio: f64,
    pub c2: f64,
    pub pass: bool,
}

/// Volume-radius bound for `Q = absconv{z_1, ..., z_m} ⊂ r B_2^k`.
pub fn bf_bound_check(points: &[Vec<f64>], r: f64, c2: f64, trials: usize, seed: RngSeed) -> Result<BfReport> {
    let q = VPolytope::from_rows(points, "Q")?;
    let k = q.n;
    if k > 4 {
        return Err(GlabError::UnsupportedDimension(k, "needs k <= 4".into()));
    }
    if q.circumradius() > r * (1.0 + 1e-12) {
        return Err(GlabError::InvalidBound { radius: r, needed: q.circumradius() });
    }
    if !q.full_dimensional {
        return Err(GlabError::DegenerateSample("points do not span R^k".into()));
    }
    let m = points.len();
    let volume = body_volume(&q, trials, seed)?;
    let ratio = volume.powf(1.0 / k as f64) * (k as f64).sqrt() / (r * (1.0 + m as f64 / k as f64).ln().sqrt());
    Ok(BfReport { k, m, r, volume, ratio, c2, pass: ratio <= c2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_volumes() {
        assert_abs_diff_eq!(volume_exact_lowdim(&VPolytope::cross_polytope(3)).unwrap(), 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(volume_exact_lowdim(&VPolytope::cube(3)).unwrap(), 8.0, epsilon = 1e-12);
        assert!(volume_exact_lowdim(&VPolytope::cross_polytope(4)).is_err());
    }

    #[test]
    fn bounding_violation_detected() {
        let r = volume_mc(Body::V(&VPolytope::cube(2)), 1.0, 10, RngSeed::new(0));
        assert!(matches!(r, Err(GlabError::InvalidBound { .. })));
    }

    #[test]
    fn cross_polytope_mc() {
        let r = volume_mc(Body::V(&VPolytope::cross_polytope(2)), 1.0, 200_000, RngSeed::new(3)).unwrap();
        assert!((r.value - 2.0).abs() < 0.03 * 2.0);
    }

    #[test]
    fn polar_box_radius_of_cross_polytope() {
        let r = polar_bounding_radius(&VPolytope::cross_polytope(4)).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn bf_closed_form() {
        let pts = vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![-2.0, 0.0], vec![0.0, -2.0]];
        let rep = bf_bound_check(&pts, 2.0, 4.0, 10, RngSeed::new(0)).unwrap();
        assert_abs_diff_eq!(rep.ratio, 2.0 / 3f64.ln().sqrt(), epsilon = 1e-12);
        assert!(rep.pass);
    }
}
