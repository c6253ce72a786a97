//! Seeded samplers for isotropic log-concave laws and empirical checks of their concentration.
//!
//! The four closed-form families are exactly isotropic (mean zero, identity covariance):
//!
//! | family                | construction                                   | `‖f‖∞^{1/n}`               |
//! |-----------------------|------------------------------------------------|----------------------------|
//! | `gaussian`            | standard normal                                | `(2π)^{-1/2}`              |
//! | `cube_uniform`        | uniform on `[-√3, √3]^n`                       | `1 / (2√3)`                |
//! | `product_exponential` | i.i.d. Laplace with scale `1/√2`               | `1/√2`                     |
//! | `ball_uniform`        | uniform on the ball of radius `√(n+2)`         | `1 / (√(n+2) ω_n^{1/n})`   |
//!
//! `hit_and_run_body` walks inside a symmetric H-polytope and is only approximately uniform; pass
//! its output through [`isotropize`] before treating it as isotropic.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GlabError, Result};
use crate::linalg::{norm2, random_unit};
use crate::operators::LinearMap;
use crate::polytope::HPolytope;
use crate::report::{BoundCheck, EstimateReport};
use crate::rng::{count_trials, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    CubeUniform,
    ProductExponential,
    BallUniform,
    HitAndRunBody {
        body: HPolytope,
        /// Steps discarded before the first sample; defaults to `10 n^2`.
        #[serde(default)]
        burn_in: Option<usize>,
        /// Steps between recorded samples; defaults to `n`.
        #[serde(default)]
        thinning: Option<usize>,
        /// Supremum of the (isotropic) density, when known.
        #[serde(default)]
        density_sup: Option<f64>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::CubeUniform => "cube_uniform",
            Family::ProductExponential => "product_exponential",
            Family::BallUniform => "ball_uniform",
            Family::HitAndRunBody { .. } => "hit_and_run_body",
        }
    }

    pub fn builtin(name: &str) -> Option<Family> {
        Some(match name {
            "gaussian" => Family::Gaussian,
            "cube_uniform" => Family::CubeUniform,
            "product_exponential" => Family::ProductExponential,
            "ball_uniform" => Family::BallUniform,
            _ => return None,
        })
    }
}

/// Serde adapter for a standalone `family` field: built-in families are written as their name,
/// `hit_and_run_body` as the tagged object.
pub mod family_field {
    use super::Family;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(f: &Family, s: S) -> std::result::Result<S::Ok, S::Error> {
        match f {
            Family::HitAndRunBody { .. } => f.serialize(s),
            _ => s.serialize_str(f.name()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Family, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match &v {
            serde_json::Value::String(name) => {
                Family::builtin(name).ok_or_else(|| D::Error::custom(format!("unknown family `{name}`")))
            }
            _ => Family::deserialize(v).map_err(D::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
}

impl DistributionSpec {
    pub fn new(family: Family, n: usize) -> Self {
        DistributionSpec { family, n }
    }

    pub fn gaussian(n: usize) -> Self {
        Self::new(Family::Gaussian, n)
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.family, Family::HitAndRunBody { .. })
    }

    /// Draws one point of a closed-form family into `out`.
    fn draw_exact<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.n;
        match &self.family {
            Family::Gaussian => out.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
            Family::CubeUniform => {
                let h = 3f64.sqrt();
                out.iter_mut().for_each(|x| *x = rng.gen_range(-h..h));
            }
            Family::ProductExponential => {
                let scale = std::f64::consts::FRAC_1_SQRT_2;
                out.iter_mut().for_each(|x| {
                    let e: f64 = rng.sample(Exp1);
                    *x = if rng.gen::<bool>() { e * scale } else { -e * scale };
                });
            }
            Family::BallUniform => {
                let dir = random_unit(rng, n);
                let u: f64 = rng.gen();
                let r = ((n + 2) as f64).sqrt() * u.powf(1.0 / n as f64);
                out.iter_mut().zip(dir).for_each(|(x, d)| *x = r * d);
            }
            Family::HitAndRunBody { .. } => unreachable!("hit-and-run is drawn as a chain"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub n: usize,
    pub m: usize,
    /// Row-major `m x n`.
    pub points: Vec<f64>,
    /// Family name, or a free label for externally supplied points.
    pub family: String,
    pub seed: RngSeed,
}

impl SampleSet {
    pub fn from_rows(rows: &[Vec<f64>], family: impl Into<String>, seed: RngSeed) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return invalid("a sample set needs at least one row");
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return invalid("rows must share a positive dimension");
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return invalid("sample rows must be finite");
        }
        Ok(SampleSet { n, m, points: rows.concat(), family: family.into(), seed })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.n)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.n];
        for r in self.rows() {
            mu.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        mu.iter_mut().for_each(|a| *a /= self.m as f64);
        mu
    }

    /// Empirical covariance (normalised by `m`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut cov = DMatrix::<f64>::zeros(self.n, self.n);
        for r in self.rows() {
            for i in 0..self.n {
                let di = r[i] - mu[i];
                for j in i..self.n {
                    cov[(i, j)] += di * (r[j] - mu[j]);
                }
            }
        }
        for i in 0..self.n {
            for j in i..self.n {
                let v = cov[(i, j)] / self.m as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    pub fn scaled(&self, factor: f64) -> SampleSet {
        SampleSet { points: self.points.iter().map(|x| x * factor).collect(), ..self.clone() }
    }
}

/// Draws `m` points of `spec` from the stream `seed`.
pub fn sample(spec: &DistributionSpec, m: usize, seed: RngSeed) -> Result<SampleSet> {
    if m == 0 || spec.n == 0 {
        return invalid("sample needs m >= 1 and n >= 1");
    }
    let n = spec.n;
    let mut rng = seed.rng();
    let points = match &spec.family {
        Family::HitAndRunBody { body, burn_in, thinning, .. } => {
            let burn = burn_in.unwrap_or(10 * n * n);
            let thin = thinning.unwrap_or(n).max(1);
            hit_and_run(body, m, burn, thin, &mut rng)?
        }
        _ => {
            let mut pts = vec![0.0; m * n];
            for row in pts.chunks_exact_mut(n) {
                spec.draw_exact(&mut rng, row);
            }
            pts
        }
    };
    Ok(SampleSet { n, m, points, family: spec.family.name().to_string(), seed })
}

/// Source of one point per trial: i.i.d. per-trial streams for exact families, a single
/// pre-generated chain for hit-and-run.
pub(crate) enum TrialPoints<'a> {
    Iid(&'a DistributionSpec, RngSeed),
    Chain(SampleSet),
}

impl<'a> TrialPoints<'a> {
    pub(crate) fn new(spec: &'a DistributionSpec, trials: usize, seed: RngSeed) -> Result<Self> {
        if spec.is_exact() {
            Ok(TrialPoints::Iid(spec, seed))
        } else {
            Ok(TrialPoints::Chain(sample(spec, trials.max(1), seed)?))
        }
    }

    pub(crate) fn point(&self, i: u64, out: &mut [f64]) {
        match self {
            TrialPoints::Iid(spec, seed) => spec.draw_exact(&mut seed.trial(i).rng(), out),
            TrialPoints::Chain(s) => out.copy_from_slice(s.row(i as usize)),
        }
    }
}

fn hit_and_run<R: Rng + ?Sized>(
    body: &HPolytope,
    m: usize,
    burn_in: usize,
    thinning: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = body.n;
    if !body.is_bounded() {
        return Err(GlabError::SamplerFailure(format!("body '{}' is unbounded: normals do not span R^{n}", body.label)));
    }
    const CAP: usize = 1000;
    let mut x = vec![0.0; n];
    let mut out = Vec::with_capacity(m * n);
    let total = burn_in + m * thinning;
    for step in 0..total {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let d = random_unit(rng, n);
            if let Some((lo, hi)) = body.chord(&x, &d) {
                let t = rng.gen_range(lo..=hi);
                x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += t * di);
                break;
            }
            if attempts >= CAP {
                return Err(GlabError::SamplerFailure(format!(
                    "no bounded chord found in {CAP} directions; body is unbounded"
                )));
            }
        }
        if step >= burn_in && (step - burn_in + 1) % thinning == 0 {
            out.extend_from_slice(&x);
        }
    }
    Ok(out)
}

/// Result of whitening a sample.
#[derive(Debug, Clone)]
pub struct Isotropized {
    pub samples: SampleSet,
    /// Symmetric `Σ^{-1/2}`; rows of the output are `transform * (x - shift)`.
    pub transform: LinearMap,
    pub shift: Vec<f64>,
}

/// Moves a sample to isotropic position: empirical mean 0 and empirical covariance `I`.
pub fn isotropize(raw: &SampleSet) -> Result<Isotropized> {
    let n = raw.n;
    let mu = raw.mean();
    let cov = raw.covariance();
    let eig = SymmetricEigen::new(cov);
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_eig > 1e-10) {
        return Err(GlabError::RankDeficient(min_eig));
    }
    let inv_sqrt = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let q = &eig.eigenvectors;
    let w = q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let mut points = vec![0.0; raw.points.len()];
    for (src, dst) in raw.rows().zip(points.chunks_exact_mut(n)) {
        let centered: Vec<f64> = src.iter().zip(&mu).map(|(a, b)| a - b).collect();
        for i in 0..n {
            dst[i] = (0..n).map(|j| w[(i, j)] * centered[j]).sum();
        }
    }
    let mut samples = SampleSet { points, ..raw.clone() };
    // one correction pass removes the rounding left by the eigen-decomposition
    let mu2 = samples.mean();
    let cov2 = samples.covariance();
    let eig2 = SymmetricEigen::new(cov2);
    let inv2 = DVector::from_iterator(n, eig2.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let w2 = &eig2.eigenvectors * DMatrix::from_diagonal(&inv2) * eig2.eigenvectors.transpose();
    let w2 = (&w2 + w2.transpose()) * 0.5;
    for row in samples.points.chunks_exact_mut(n) {
        let centered: Vec<f64> = row.iter().zip(&mu2).map(|(a, b)| a - b).collect();
        for i in 0..n {
            row[i] = (0..n).map(|j| w2[(i, j)] * centered[j]).sum();
        }
    }
    let total = &w2 * &w;
    // x_out = w2 (w (x - mu) - mu2) = total (x - mu - w^{-1} mu2)
    let w_inv = w.clone().try_inverse().ok_or(GlabError::RankDeficient(min_eig))?;
    let extra = &w_inv * DVector::from_column_slice(&mu2);
    let shift: Vec<f64> = mu.iter().zip(extra.iter()).map(|(a, b)| a + b).collect();
    Ok(Isotropized { samples, transform: LinearMap::new(total)?, shift })
}

/// Empirical mean size and covariance distance from the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyReport {
    pub empirical_mean_norm: f64,
    /// Largest singular value of `Cov - I`.
    pub covariance_operator_distance: f64,
    pub isotropic_constant_estimate: f64,
}

pub fn isotropy_report(samples: &SampleSet, spec: &DistributionSpec) -> Result<IsotropyReport> {
    let mu = samples.mean();
    let cov = samples.covariance() - DMatrix::<f64>::identity(samples.n, samples.n);
    let eig = SymmetricEigen::new(cov);
    let dist = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    Ok(IsotropyReport {
        empirical_mean_norm: norm2(&mu),
        covariance_operator_distance: dist,
        isotropic_constant_estimate: isotropic_constant(spec)?,
    })
}

/// Volume of the Euclidean unit ball in dimension `n`, `π^{n/2} / Γ(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    (h * std::f64::consts::PI.ln() - statrs::function::gamma::ln_gamma(h + 1.0)).exp()
}

/// `‖f‖∞^{1/n}` for the isotropic density of `spec`.
pub fn isotropic_constant(spec: &DistributionSpec) -> Result<f64> {
    let n = spec.n as f64;
    Ok(match &spec.family {
        Family::Gaussian => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
        Family::CubeUniform => 1.0 / (2.0 * 3f64.sqrt()),
        Family::ProductExponential => std::f64::consts::FRAC_1_SQRT_2,
        Family::BallUniform => 1.0 / ((n + 2.0).sqrt() * unit_ball_volume(spec.n).powf(1.0 / n)),
        Family::HitAndRunBody { density_sup: Some(s), .. } if *s > 0.0 => s.powf(1.0 / n),
        Family::HitAndRunBody { .. } => {
            return Err(GlabError::UnsupportedFamily("hit_and_run_body without a density bound".into()))
        }
    })
}

/// Fraction of rows whose length falls outside `[eps0 √n, b √n]`.
pub fn radius_band_check(samples: &SampleSet, eps0: f64, b: f64) -> Result<EstimateReport> {
    if !(eps0 < b) || eps0 < 0.0 {
        return invalid(format!("radius band needs 0 <= eps0 < b (got {eps0}, {b})"));
    }
    let sn = (samples.n as f64).sqrt();
    let outside = samples
        .rows()
        .filter(|r| {
            let len = norm2(r);
            len < eps0 * sn || len > b * sn
        })
        .count();
    Ok(EstimateReport::wilson(outside, samples.m, samples.seed, "radius_band"))
}

/// Empirical `P(|x| >= c t √n)` against `exp(-t √n)` for each `t`.
pub fn paouris_tail_check(
    spec: &DistributionSpec,
    t_values: &[f64],
    c: f64,
    trials: usize,
    seed: RngSeed,
) -> Result<Vec<BoundCheck>> {
    if trials == 0 {
        return invalid("trials must be positive");
    }
    if let Some(t) = t_values.iter().find(|&&t| !(t >= 1.0)) {
        return invalid(format!("tail parameter t = {t} must be >= 1"));
    }
    let n = spec.n;
    let sn = (n as f64).sqrt();
    let src = TrialPoints::new(spec, trials, seed)?;
    // lengths are shared across t values
    let lengths: Vec<f64> = crate::rng::map_trials(trials, |i| {
        let mut x = vec![0.0; n];
        src.point(i, &mut x);
        norm2(&x)
    });
    Ok(t_values
        .iter()
        .map(|&t| {
            let hits = lengths.iter().filter(|&&l| l >= c * t * sn).count();
            let est = EstimateReport::wilson(hits, trials, seed, format!("paouris_tail(c={c})"));
            let bound = (-t * sn).exp();
            BoundCheck { label: format!("t={t}"), pass: est.ci_high <= bound, estimate: est, bound }
        })
        .collect())
}

/// Empirical `P(|x - y|^2 <= eps n)` against `eps^{c0 n}`.
pub fn small_ball_check(
    spec: &DistributionSpec,
    eps: f64,
    y: &[f64],
    c0: f64,
    trials: usize,
    seed: RngSeed,
) -> Result<BoundCheck> {
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("small-ball radius eps = {eps} must lie in (0, 1]"));
    }
    if y.len() != spec.n {
        return invalid("centre has the wrong dimension");
    }
    let n = spec.n;
    let src = TrialPoints::new(spec, trials, seed)?;
    let hits = count_trials(trials, |i| {
        let mut x = vec![0.0; n];
        src.point(i, &mut x);
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= eps * n as f64
    });
    let est = EstimateReport::wilson(hits, trials, seed, format!("small_ball(c0={c0})"));
    let bound = eps.powf(c0 * n as f64);
    Ok(BoundCheck { label: format!("eps={eps}"), pass: est.ci_high <= bound, estimate: est, bound })
}

/// Empirical `μ(αK)` against `‖f‖∞ α^n vol(K)`, with a relative slack on the bound.
pub fn measure_vs_volume_check(
    spec: &DistributionSpec,
    body: &crate::polytope::VPolytope,
    alpha: f64,
    tolerance: f64,
    trials: usize,
    seed: RngSeed,
) -> Result<BoundCheck> {
    if !(alpha >= 1e-3) {
        return invalid(format!("alpha = {alpha} is below the supported limit 1e-3"));
    }
    if body.n != spec.n {
        return invalid("body and distribution dimensions differ");
    }
    let n = spec.n;
    let volume = crate::estimators::body_volume(body, trials, seed.derive(1))?;
    let sup = isotropic_constant(spec)?.powi(n as i32);
    let bound = sup * alpha.powi(n as i32) * volume;
    let src = TrialPoints::new(spec, trials, seed)?;
    let oracle = crate::polytope::GaugeOracle::new(body)?;
    let hits = count_trials(trials, |i| {
        let mut x = vec![0.0; n];
        src.point(i, &mut x);
        oracle.clone().norm(&x).map(|v| v <= alpha).unwrap_or(false)
    });
    let est = EstimateReport::wilson(hits, trials, seed, "measure_vs_volume");
    Ok(BoundCheck {
        label: format!("alpha={alpha}"),
        pass: est.ci_high <= bound * (1.0 + tolerance),
        estimate: est,
        bound,
    })
}

/// Largest spectral distance between the empirical covariance and the identity.
pub fn covariance_distance(samples: &SampleSet) -> f64 {
    let cov = samples.covariance() - DMatrix::<f64>::identity(samples.n, samples.n);
    SymmetricEigen::new(cov).eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_bit_reproducible() {
        for fam in ["gaussian", "cube_uniform", "product_exponential", "ball_uniform"] {
            let spec = DistributionSpec::new(Family::builtin(fam).unwrap(), 3);
            let a = sample(&spec, 1, RngSeed::new(5)).unwrap();
            let b = sample(&spec, 1, RngSeed::new(5)).unwrap();
            assert_eq!(a.m, 1);
            assert_eq!(a.points, b.points);
        }
    }

    #[test]
    fn cube_variance_is_one() {
        let s = sample(&DistributionSpec::new(Family::CubeUniform, 1), 1_000_000, RngSeed::new(1)).unwrap();
        let var = s.covariance()[(0, 0)];
        assert!((0.99..=1.01).contains(&var), "{var}");
    }

    #[test]
    fn gaussian_covariance_close_to_identity() {
        let s = sample(&DistributionSpec::gaussian(4), 10_000, RngSeed::new(2)).unwrap();
        assert!(covariance_distance(&s) < 0.1);
    }

    #[test]
    fn closed_form_isotropic_constants() {
        let g = isotropic_constant(&DistributionSpec::gaussian(7)).unwrap();
        assert!((g - 0.398_942_280_4).abs() < 1e-9);
        let c = isotropic_constant(&DistributionSpec::new(Family::CubeUniform, 3)).unwrap();
        assert!((c - 0.288_675_134_6).abs() < 1e-9);
        let e = isotropic_constant(&DistributionSpec::new(Family::ProductExponential, 5)).unwrap();
        assert!((e - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn hit_and_run_without_density_is_unsupported() {
        let body = HPolytope::new(2, vec![1.0, 0.0, 0.0, 1.0], "square").unwrap();
        let spec = DistributionSpec::new(
            Family::HitAndRunBody { body, burn_in: None, thinning: None, density_sup: None },
            2,
        );
        assert!(matches!(isotropic_constant(&spec), Err(GlabError::UnsupportedFamily(_))));
    }

    #[test]
    fn hit_and_run_unbounded_body_fails() {
        let body = HPolytope::new(2, vec![1.0, 0.0], "slab").unwrap();
        let spec = DistributionSpec::new(
            Family::HitAndRunBody { body, burn_in: Some(5), thinning: None, density_sup: None },
            2,
        );
        assert!(matches!(sample(&spec, 10, RngSeed::new(1)), Err(GlabError::SamplerFailure(_))));
    }

    #[test]
    fn radius_band_edges() {
        let origin = SampleSet::from_rows(&[vec![0.0, 0.0]], "origin", RngSeed::new(0)).unwrap();
        assert_eq!(radius_band_check(&origin, 0.5, 3.0).unwrap().value, 1.0);
        assert_eq!(radius_band_check(&origin, 0.0, 3.0).unwrap().value, 0.0);
        assert!(radius_band_check(&origin, 3.0, 0.5).is_err());
    }

    #[test]
    fn scaled_points_whiten_to_a_third() {
        let s = sample(&DistributionSpec::gaussian(3), 5000, RngSeed::new(9)).unwrap();
        let a = isotropize(&s).unwrap();
        let b = isotropize(&s.scaled(3.0)).unwrap();
        let ratio = &a.transform.matrix / 3.0 - &b.transform.matrix;
        assert!(ratio.norm() < 1e-9);
    }
}
