use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use super::gluskin::PolytopeModel;
use crate::error::{invalid, GlabError, Result};
use crate::estimators::gluskin_gamma;
use crate::linalg::{norm2, orthonormal_columns, random_gaussian_matrix};
use crate::operators::{margin_of, op_norm_with, two_p_mixing_test, LinearMap, Subspace};
use crate::polytope::{GaugeOracle, VPolytope};
use crate::rng::{map_trials, RngSeed};
use crate::sampling::{DistributionSpec, Family};

fn default_c5() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkConfig {
    pub model: PolytopeModel,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_family", with = "crate::sampling::family_field")]
    pub family: Family,
    #[serde(default = "default_c5")]
    pub c5: f64,
    /// `max |x_j| / √n` over both samples when absent.
    #[serde(default)]
    pub b: Option<f64>,
    /// Overrides `γ = 1/(C₅ b √ln(1+m/n))`.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub seed: RngSeed,
}

pub(crate) fn default_family() -> Family {
    Family::Gaussian
}

/// Maps fed to [`sk_criterion_scan`]; each is rescaled to `s_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSamples {
    Gaussian(usize),
    Given(Vec<LinearMap>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkReport {
    pub c5: f64,
    pub b: f64,
    pub gamma: f64,
    pub k: usize,
    /// `γ√n / 2`.
    pub threshold: f64,
    pub operators: usize,
    pub violations: usize,
    pub fraction: f64,
    pub min_norm: f64,
    pub norms: Vec<f64>,
}

/// Fraction of maps with `s_k(T) = 1` and `‖T : X_{B_m} → Y_{A_m}‖ < γ√n/2`, `k = ⌊n/2⌋`.
pub fn sk_criterion_scan(config: &SkConfig, operators: &OperatorSamples) -> Result<SkReport> {
    let (n, m) = (config.n, config.m);
    if n < 2 {
        return invalid("need n >= 2 so that k = n/2 >= 1");
    }
    let spec = DistributionSpec::new(config.family.clone(), n);
    let sx = crate::sampling::sample(&spec, m, config.seed.derive(0))?;
    let sy = crate::sampling::sample(&spec, m, config.seed.derive(1))?;
    let build = |s| match config.model {
        PolytopeModel::BasisEnriched => crate::polytope::build_basis_enriched(s),
        PolytopeModel::Pure => crate::polytope::build_pure(s),
    };
    let (x, y) = (build(&sx), build(&sy));
    if !x.full_dimensional || !y.full_dimensional {
        return Err(GlabError::DegenerateSample("a model polytope is not full-dimensional".into()));
    }
    let b = config.b.unwrap_or_else(|| {
        sx.rows().chain(sy.rows()).map(norm2).fold(0.0, f64::max) / (n as f64).sqrt()
    });
    let gamma = config.gamma.unwrap_or_else(|| gluskin_gamma(config.c5, b, m, n));
    if !(gamma >= 0.0) {
        return invalid("gamma must be non-negative");
    }
    let k = n / 2;
    let maps: Vec<DMatrix<f64>> = match operators {
        OperatorSamples::Gaussian(count) => (0..*count)
            .map(|i| random_gaussian_matrix(&mut config.seed.derive(2).trial(i as u64).rng(), n, n))
            .collect(),
        OperatorSamples::Given(list) => list.iter().map(|t| t.matrix.clone()).collect(),
    };
    let oy = GaugeOracle::new(&y)?;
    let norms = map_trials(maps.len(), |i| -> Result<f64> {
        let t = LinearMap::new(maps[i as usize].clone())?;
        if t.n != n {
            return invalid("operator dimension differs from n");
        }
        let sk = t.s(k);
        if !(sk > 0.0) {
            return Err(GlabError::SingularMap(sk));
        }
        op_norm_with(&(&t.matrix / sk), &x, &mut oy.clone())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let threshold = gamma * (n as f64).sqrt() / 2.0;
    let violations = norms.iter().filter(|&&v| v < threshold).count();
    Ok(SkReport {
        c5: config.c5,
        b,
        gamma,
        k,
        threshold,
        operators: norms.len(),
        violations,
        fraction: violations as f64 / norms.len().max(1) as f64,
        min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
        norms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionFamily {
    /// `diag(1_S)` for a random coordinate set `S`.
    Coordinate,
    /// `QQᵀ` for a random orthonormal `Q`.
    Orthogonal,
    /// `A (CᵀA)⁻¹ Cᵀ` for Gaussian `A, C`.
    Oblique,
}

impl ProjectionFamily {
    pub const ALL: [ProjectionFamily; 3] =
        [ProjectionFamily::Coordinate, ProjectionFamily::Orthogonal, ProjectionFamily::Oblique];

    fn draw(self, n: usize, r: usize, seed: RngSeed) -> Option<DMatrix<f64>> {
        let mut rng = seed.rng();
        match self {
            ProjectionFamily::Coordinate => {
                let mut p = DMatrix::zeros(n, n);
                for i in sample_indices(&mut rng, n, r) {
                    p[(i, i)] = 1.0;
                }
                Some(p)
            }
            ProjectionFamily::Orthogonal => {
                let q = orthonormal_columns(&random_gaussian_matrix(&mut rng, n, r), 1e-10);
                (q.nrows() == r).then(|| q.transpose() * q)
            }
            ProjectionFamily::Oblique => {
                let a = random_gaussian_matrix(&mut rng, n, r);
                let c = random_gaussian_matrix(&mut rng, n, r);
                let inner = (c.transpose() * &a).try_inverse()?;
                Some(&a * inner * c.transpose())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisConstantReport {
    /// Smallest exact `‖P : X_B → X_B‖` found; an upper bound of the infimum over projections.
    pub min_projection_norm_found: f64,
    pub argmin_rank: usize,
    pub argmin_family: ProjectionFamily,
    pub ranks_scanned: Vec<usize>,
    pub trials: usize,
    /// `√n / √ln(1 + m/n)` with `m` the generator count.
    pub reference_scale: f64,
}

/// Exact norms of random projections with ranks in `rank_range` (inclusive). Trial `i` uses
/// family `families[i mod f]` and rank `lo + (i / f) mod (hi - lo + 1)`.
pub fn projection_norm_scan(
    b: &VPolytope,
    rank_range: (usize, usize),
    trials: usize,
    families: &[ProjectionFamily],
    seed: RngSeed,
) -> Result<BasisConstantReport> {
    let n = b.n;
    let (lo, hi) = rank_range;
    if lo < 1 || hi >= n || lo > hi {
        return invalid(format!("rank range [{lo}, {hi}] must lie within [1, {}]", n - 1));
    }
    if families.is_empty() || trials == 0 {
        return invalid("need at least one family and one trial");
    }
    let oracle = GaugeOracle::new(b)?;
    let nr = hi - lo + 1;
    let results = map_trials(trials, |i| -> Result<(f64, usize, ProjectionFamily)> {
        let fam = families[i as usize % families.len()];
        let r = lo + (i as usize / families.len()) % nr;
        let mut attempt = 0u64;
        let p = loop {
            if let Some(p) = fam.draw(n, r, seed.trial(i).derive(attempt)) {
                break p;
            }
            attempt += 1;
            if attempt > 16 {
                return Err(GlabError::NumericalFailure("could not draw a nonsingular projection".into()));
            }
        };
        Ok((op_norm_with(&p, b, &mut oracle.clone())?, r, fam))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (best, rank, fam) = results
        .iter()
        .copied()
        .fold((f64::INFINITY, lo, families[0]), |acc, cur| if cur.0 < acc.0 { cur } else { acc });
    let m = b.num_generators() as f64;
    Ok(BasisConstantReport {
        min_projection_norm_found: best,
        argmin_rank: rank,
        argmin_family: fam,
        ranks_scanned: (lo..=hi).collect(),
        trials,
        reference_scale: (n as f64).sqrt() / (1.0 + m / n as f64).ln().sqrt(),
    })
}

/// One member `T + λI` of a mixing family with the subspace certifying its mixing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingMember {
    pub map: LinearMap,
    pub lambda: f64,
    pub base: usize,
    pub witness: Subspace,
}

/// `2P + λI` for each orthogonal projection `P` and each shift `λ` (including `λ = 0` when listed).
pub fn mixing_family(projections: &[LinearMap], lambdas: &[f64]) -> Result<Vec<MixingMember>> {
    let mut out = Vec::new();
    for (i, p) in projections.iter().enumerate() {
        let rep = two_p_mixing_test(p)?;
        for &l in lambdas {
            let m = &p.matrix * 2.0 + DMatrix::<f64>::identity(p.n, p.n) * l;
            out.push(MixingMember { map: LinearMap::new(m)?, lambda: l, base: i, witness: rep.witness.clone() });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingScanReport {
    pub norms: Vec<f64>,
    pub margins: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub min_norm: f64,
    /// Largest spread of margins among members sharing a base projection.
    pub max_margin_shift: f64,
    /// Largest spread of norms among members sharing a base projection.
    pub max_norm_shift: f64,
    /// `γ√n`, when `γ` is supplied.
    pub reference: Option<f64>,
}

/// Exact `‖T : X_B → X_B‖` and mixing margin for every family member.
pub fn mixing_norm_scan(b: &VPolytope, family: &[MixingMember], gamma: Option<f64>) -> Result<MixingScanReport> {
    if family.is_empty() {
        return invalid("mixing family is empty");
    }
    let oracle = GaugeOracle::new(b)?;
    let mut norms = Vec::with_capacity(family.len());
    let mut margins = Vec::with_capacity(family.len());
    for member in family {
        if member.map.n != b.n {
            return invalid("family and body dimensions differ");
        }
        norms.push(op_norm_with(&member.map.matrix, b, &mut oracle.clone())?);
        margins.push(margin_of(&member.map.matrix, &member.witness));
    }
    let spread = |vals: &[f64]| {
        let bases = family.iter().map(|m| m.base).max().unwrap_or(0) + 1;
        (0..bases)
            .map(|k| {
                let group: Vec<f64> =
                    family.iter().zip(vals).filter(|(m, _)| m.base == k).map(|(_, &v)| v).collect();
                let hi = group.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = group.iter().copied().fold(f64::INFINITY, f64::min);
                if group.is_empty() { 0.0 } else { hi - lo }
            })
            .fold(0.0, f64::max)
    };
    Ok(MixingScanReport {
        min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
        max_margin_shift: spread(&margins),
        max_norm_shift: spread(&norms),
        lambdas: family.iter().map(|m| m.lambda).collect(),
        reference: gamma.map(|g| g * (b.n as f64).sqrt()),
        norms,
        margins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coordinate(n: usize, set: &[usize]) -> LinearMap {
        let mut p = DMatrix::zeros(n, n);
        for &i in set {
            p[(i, i)] = 1.0;
        }
        LinearMap::new(p).unwrap()
    }

    #[test]
    fn coordinate_projections_on_cross_polytope_have_norm_one() {
        let b = VPolytope::cross_polytope(6);
        let r = projection_norm_scan(&b, (2, 4), 12, &[ProjectionFamily::Coordinate], RngSeed::new(1)).unwrap();
        assert!((r.min_projection_norm_found - 1.0).abs() < 1e-9);
        assert_eq!(r.ranks_scanned, vec![2, 3, 4]);
    }

    #[test]
    fn full_rank_is_outside_the_contract() {
        let b = VPolytope::cross_polytope(4);
        assert!(projection_norm_scan(&b, (1, 4), 3, &ProjectionFamily::ALL, RngSeed::new(1)).is_err());
    }

    #[test]
    fn drawn_matrices_are_projections() {
        for fam in ProjectionFamily::ALL {
            let p = fam.draw(5, 2, RngSeed::new(3)).unwrap();
            assert!((&p * &p - &p).amax() < 1e-9, "{fam:?}");
            assert!((p.trace() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn doubled_coordinate_projection_has_norm_two() {
        let b = VPolytope::cross_polytope(4);
        let fam = mixing_family(&[coordinate(4, &[0, 2])], &[0.0]).unwrap();
        let r = mixing_norm_scan(&b, &fam, None).unwrap();
        assert!((r.norms[0] - 2.0).abs() < 1e-9);
        assert!((r.margins[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shifts_keep_margins_and_move_norms() {
        let b = VPolytope::cross_polytope(4);
        let fam = mixing_family(&[coordinate(4, &[1, 3])], &[0.0, -3.0, 1.0, 10.0]).unwrap();
        let r = mixing_norm_scan(&b, &fam, Some(0.5)).unwrap();
        assert!(r.max_margin_shift < 1e-10);
        assert!(r.max_norm_shift > 1.0);
        assert_eq!(r.reference, Some(1.0));
    }

    #[test]
    fn empty_family_is_an_error() {
        assert!(mixing_norm_scan(&VPolytope::cross_polytope(2), &[], None).is_err());
    }

    #[test]
    fn zero_gamma_has_no_violations() {
        let cfg = SkConfig {
            model: PolytopeModel::BasisEnriched,
            n: 4,
            m: 8,
            family: Family::Gaussian,
            c5: 1.0,
            b: None,
            gamma: Some(0.0),
            seed: RngSeed::new(2),
        };
        let r = sk_criterion_scan(&cfg, &OperatorSamples::Gaussian(20)).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn scaling_does_not_change_the_statistic() {
        let cfg = SkConfig {
            model: PolytopeModel::BasisEnriched,
            n: 4,
            m: 8,
            family: Family::Gaussian,
            c5: 1.0,
            b: None,
            gamma: None,
            seed: RngSeed::new(2),
        };
        let id = LinearMap::identity(4);
        let big = LinearMap::new(DMatrix::identity(4, 4) * 1e9).unwrap();
        let a = sk_criterion_scan(&cfg, &OperatorSamples::Given(vec![id])).unwrap();
        let b = sk_criterion_scan(&cfg, &OperatorSamples::Given(vec![big])).unwrap();
        assert!((a.norms[0] - b.norms[0]).abs() < 1e-9 * a.norms[0]);
        assert_eq!(a.violations, b.violations);
    }
}
