//! Greedy operator-norm nets of operator balls and the volumetric bound on their size.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LinearMap;
use crate::error::{invalid, GlabError, Result};
use crate::linalg::jacobi_svd;
use crate::polytope::{facets::enumerate_facets, FacetList, VPolytope};
use crate::rng::RngSeed;
use crate::sampling::unit_ball_volume;

/// `3e`, the constant produced by the covering argument.
pub const DEFAULT_C0: f64 = 3.0 * std::f64::consts::E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum OperatorBallKind {
    /// `{T : ‖T‖_op <= 1}`.
    VOp,
    /// `{T : T e_i ∈ B}`.
    VB(VPolytope),
    /// `SL_n ∩ √n V_B`.
    MB(VPolytope),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorBallSpec {
    #[serde(flatten)]
    pub kind: OperatorBallKind,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetReport {
    pub t: f64,
    pub seed: RngSeed,
    pub budget: usize,
    pub members_sampled: usize,
    pub net: Vec<LinearMap>,
    pub heldout: usize,
    pub heldout_covered: usize,
    /// Largest distance from a held-out member to its nearest net point.
    pub max_heldout_distance: f64,
    pub covering_pass: bool,
}

/// Euclidean operator norm; closed form for `2 x 2`.
pub(crate) fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 2 && m.ncols() == 2 {
        let f = m.iter().map(|x| x * x).sum::<f64>();
        let d = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (f * f - 4.0 * d * d).max(0.0).sqrt();
        return ((f + disc) / 2.0).sqrt();
    }
    jacobi_svd(m).s[0]
}

struct MemberSampler {
    n: usize,
    kind: Kind,
}

enum Kind {
    VOp,
    Columns { facets: FacetList, extent: Vec<f64>, normalize: bool },
}

impl MemberSampler {
    fn new(spec: &OperatorBallSpec) -> Result<Self> {
        let n = spec.n;
        if n == 0 || n > 3 {
            return Err(GlabError::UnsupportedDimension(n, "operator nets are limited to n <= 3".into()));
        }
        let kind = match &spec.kind {
            OperatorBallKind::VOp => Kind::VOp,
            OperatorBallKind::VB(b) | OperatorBallKind::MB(b) => {
                if b.n != n {
                    return invalid("operator ball body has the wrong dimension");
                }
                let normalize = matches!(spec.kind, OperatorBallKind::MB(_));
                if normalize && !b.full_dimensional {
                    return invalid("M_B needs a full-dimensional body");
                }
                let body = if normalize { b.scaled((n as f64).sqrt()) } else { b.clone() };
                let facets = enumerate_facets(n, &body.generators)?;
                let extent = (0..n).map(|i| body.generator_rows().fold(0.0f64, |a, g| a.max(g[i].abs()))).collect();
                Kind::Columns { facets, extent, normalize }
            }
        };
        Ok(MemberSampler { n, kind })
    }

    /// One attempt; `None` when the draw is rejected.
    fn draw<R: Rng>(&self, rng: &mut R) -> Option<DMatrix<f64>> {
        let n = self.n;
        match &self.kind {
            Kind::VOp => {
                let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
                (op_norm(&m) <= 1.0).then_some(m)
            }
            Kind::Columns { facets, extent, normalize } => {
                let mut m = DMatrix::<f64>::zeros(n, n);
                let mut worst = 0.0f64;
                for c in 0..n {
                    let col = loop {
                        let v: Vec<f64> = extent.iter().map(|&r| rng.gen_range(-r..=r)).collect();
                        let g = facets.gauge(&v);
                        if g <= 1.0 {
                            worst = worst.max(g);
                            break v;
                        }
                    };
                    for r in 0..n {
                        m[(r, c)] = col[r];
                    }
                }
                if !normalize {
                    return Some(m);
                }
                let d = m.clone().lu().determinant().abs();
                if d < 1e-12 {
                    return None;
                }
                let s = d.powf(-1.0 / n as f64);
                (worst * s <= 1.0).then(|| m * s)
            }
        }
    }
}

/// Consecutive covered members after which the greedy net counts as saturated.
pub const SATURATION: usize = 20_000;

/// Greedy maximal `t`-separated subset (operator norm) of sampled members, validated on `heldout`
/// fresh members. Sampling stops after `budget` attempts or once `SATURATION` consecutive members
/// fall within `t` of the net.
pub fn greedy_net(spec: &OperatorBallSpec, t: f64, budget: usize, heldout: usize, seed: RngSeed) -> Result<NetReport> {
    if !(t > 0.0) {
        return invalid("net radius must be positive");
    }
    let sampler = MemberSampler::new(spec)?;
    let mut rng = seed.rng();
    let mut net: Vec<DMatrix<f64>> = Vec::new();
    let (mut sampled, mut streak) = (0usize, 0usize);
    for _ in 0..budget {
        let Some(m) = sampler.draw(&mut rng) else { continue };
        sampled += 1;
        if net.iter().all(|c| op_norm(&(&m - c)) > t) {
            net.push(m);
            streak = 0;
        } else {
            streak += 1;
            if streak >= SATURATION {
                break;
            }
        }
    }
    if sampled == 0 {
        return Err(GlabError::EmptySet(budget));
    }
    let mut rng = seed.derive(1).rng();
    let mut held = Vec::with_capacity(heldout);
    let mut attempts = 0;
    while held.len() < heldout && attempts < 1000 * heldout.max(1) {
        attempts += 1;
        if let Some(m) = sampler.draw(&mut rng) {
            held.push(m);
        }
    }
    let mut covered = 0;
    let mut worst = 0.0f64;
    for h in &held {
        let d = net.iter().map(|c| op_norm(&(h - c))).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        if d <= t {
            covered += 1;
        }
    }
    Ok(NetReport {
        t,
        seed,
        budget,
        members_sampled: sampled,
        net: net.into_iter().map(LinearMap::new).collect::<Result<_>>()?,
        heldout: held.len(),
        heldout_covered: covered,
        max_heldout_distance: worst,
        covering_pass: covered == held.len(),
    })
}

/// `(C₀/t)^{n²} (vol_B vol_cross / (vol_ball vol_hull))^n`.
pub fn entropy_bound(t: f64, n: usize, vol_b: f64, vol_hull: f64, vol_ball: f64, vol_cross: f64, c0: f64) -> Result<f64> {
    if !(t > 0.0) || [vol_b, vol_hull, vol_ball, vol_cross, c0].iter().any(|&v| !(v > 0.0)) {
        return invalid("entropy bound needs t > 0 and positive volumes");
    }
    let nf = n as f64;
    let log = nf * nf * (c0 / t).ln() + nf * (vol_b.ln() + vol_cross.ln() - vol_ball.ln() - vol_hull.ln());
    Ok(log.exp())
}

/// The bound for a net of `M_B`: the body is `√n B`, the points `e_1, ..., e_n`.
pub fn entropy_bound_mb(b: &VPolytope, t: f64, c0: f64) -> Result<f64> {
    let n = b.n;
    let vol_b = enumerate_facets(n, &b.generators)?.volume * (n as f64).powf(n as f64 / 2.0);
    let cross = 2f64.powi(n as i32) / (1..=n).map(|i| i as f64).product::<f64>();
    entropy_bound(t, n, vol_b, cross, unit_ball_volume(n), cross, c0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        assert!((op_norm(&m) - jacobi_svd(&m).s[0]).abs() < 1e-13);
    }

    #[test]
    fn entropy_scaling() {
        assert!((entropy_bound(DEFAULT_C0, 2, 1.0, 1.0, 1.0, 1.0, DEFAULT_C0).unwrap() - 1.0).abs() < 1e-12);
        let a = entropy_bound(0.5, 2, 3.0, 2.0, 3.1, 2.0, DEFAULT_C0).unwrap();
        let b = entropy_bound(0.25, 2, 3.0, 2.0, 3.1, 2.0, DEFAULT_C0).unwrap();
        assert!((b / a - 16.0).abs() < 1e-9);
    }

    #[test]
    fn huge_radius_gives_single_center() {
        let spec = OperatorBallSpec { kind: OperatorBallKind::VOp, n: 2 };
        let r = greedy_net(&spec, 5.0, 200, 50, RngSeed::new(1)).unwrap();
        assert_eq!(r.net.len(), 1);
        assert!(r.covering_pass);
    }

    #[test]
    fn mb_members_have_unit_determinant() {
        let spec = OperatorBallSpec { kind: OperatorBallKind::MB(VPolytope::cross_polytope(2)), n: 2 };
        let r = greedy_net(&spec, 1.0, 2000, 100, RngSeed::new(2)).unwrap();
        for t in &r.net {
            assert!((t.det().abs() - 1.0).abs() < 1e-10);
        }
    }
}
