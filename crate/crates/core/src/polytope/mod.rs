//! Centrally symmetric polytopes, the two random models, and their norm oracles.

mod centroid;
pub mod facets;
mod gauge;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use centroid::{
    dgt_inclusion_check, zp_inclusion_check, zp_support_estimate, DgtReport, ZpInclusionReport, ZpSource,
};
pub use facets::FacetList;
pub use gauge::GaugeOracle;

use crate::error::{invalid, GlabError, Result};
use crate::linalg::{dot, jacobi_svd, norm2, orthonormal_columns, random_unit};
use crate::lp::{solve_lp_with, LpOptions, LpProblem, LpStatus, VarBound};
use crate::rng::RngSeed;
use crate::sampling::SampleSet;

/// `absconv{±g_1, ..., ±g_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VPolytope {
    pub n: usize,
    /// Row-major `k x n`.
    pub generators: Vec<f64>,
    pub label: String,
    pub full_dimensional: bool,
}

impl VPolytope {
    pub fn new(n: usize, generators: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if n == 0 || generators.is_empty() || generators.len() % n != 0 {
            return invalid(format!("generator buffer of length {} does not fit dimension {n}", generators.len()));
        }
        if generators.iter().any(|x| !x.is_finite()) {
            return invalid("generators must be finite");
        }
        let k = generators.len() / n;
        let g = DMatrix::from_row_slice(k, n, &generators);
        let rank = span_rank(&g);
        Ok(VPolytope { n, generators, label: label.into(), full_dimensional: rank == n })
    }

    pub fn from_rows(rows: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return invalid("generator rows have different lengths");
        }
        Self::new(n, rows.concat(), label)
    }

    /// `B_1^n`, generated by the standard basis.
    pub fn cross_polytope(n: usize) -> Self {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            g[i * n + i] = 1.0;
        }
        VPolytope { n, generators: g, label: format!("cross_polytope_{n}"), full_dimensional: true }
    }

    /// `[-1, 1]^n`, generated by the `2^{n-1}` sign vectors with first coordinate `+1`.
    pub fn cube(n: usize) -> Self {
        let k = 1usize << (n - 1);
        let mut g = Vec::with_capacity(k * n);
        for mask in 0..k {
            g.push(1.0);
            for i in 1..n {
                g.push(if mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 });
            }
        }
        VPolytope { n, generators: g, label: format!("cube_{n}"), full_dimensional: true }
    }

    /// Regular polygon with `vertices` (even, ≥ 4) vertices on the unit circle, one at `e_1`.
    pub fn regular_polygon(vertices: usize) -> Result<Self> {
        if vertices < 4 || vertices % 2 == 1 {
            return invalid("a symmetric regular polygon needs an even vertex count >= 4");
        }
        let half = vertices / 2;
        let g: Vec<f64> = (0..half)
            .flat_map(|j| {
                let a = std::f64::consts::PI * j as f64 / half as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        Ok(VPolytope { n: 2, generators: g, label: format!("regular_{vertices}_gon"), full_dimensional: true })
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len() / self.n
    }

    #[inline]
    pub fn generator(&self, j: usize) -> &[f64] {
        &self.generators[j * self.n..(j + 1) * self.n]
    }

    pub fn generator_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.generators.chunks_exact(self.n)
    }

    /// `max_j |g_j|`, the exact circumradius.
    pub fn circumradius(&self) -> f64 {
        self.generator_rows().map(norm2).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> VPolytope {
        VPolytope {
            generators: self.generators.iter().map(|x| x * factor).collect(),
            label: format!("{}*{}", factor, self.label),
            ..self.clone()
        }
    }

    /// Image `T(P)`; generators become `T g_j`.
    pub fn mapped(&self, t: &DMatrix<f64>) -> Result<VPolytope> {
        if t.ncols() != self.n {
            return invalid("map and polytope dimensions differ");
        }
        let gens: Vec<f64> = self.generator_rows().flat_map(|g| crate::linalg::mat_vec(t, g)).collect();
        VPolytope::new(t.nrows(), gens, format!("T({})", self.label))
    }

    /// Orthonormal basis of the generator span, one row per direction.
    pub fn span_basis(&self) -> DMatrix<f64> {
        let g = DMatrix::from_row_slice(self.num_generators(), self.n, &self.generators);
        orthonormal_columns(&g.transpose(), 1e-10)
    }

    /// Same body with non-extreme generators dropped (`n <= 3`; larger `n` is returned as is).
    pub fn reduced(&self) -> Result<VPolytope> {
        if self.n > 3 || !self.full_dimensional || (self.n == 3 && self.num_generators() > facets::MAX_FACET_GENERATORS) {
            return Ok(self.clone());
        }
        let f = facets::enumerate_facets(self.n, &self.generators)?;
        let keep: Vec<f64> = self
            .generator_rows()
            .filter(|g| f.gauge(g) >= 1.0 - 1e-9)
            .flatten()
            .copied()
            .collect();
        Ok(VPolytope { generators: keep, ..self.clone() })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.num_generators(), self.n, &self.generators)
    }
}

fn span_rank(g: &DMatrix<f64>) -> usize {
    let svd = jacobi_svd(g);
    let top = svd.s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    svd.s.iter().filter(|&&s| s > 1e-10 * top).count()
}

/// `{y : |<u_j, y>| <= 1 for all j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPolytope {
    pub n: usize,
    /// Row-major, one normal per row.
    pub normals: Vec<f64>,
    pub label: String,
}

impl HPolytope {
    pub fn new(n: usize, normals: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if n == 0 || normals.is_empty() || normals.len() % n != 0 {
            return invalid("normal buffer does not fit the dimension");
        }
        if normals.iter().any(|x| !x.is_finite()) {
            return invalid("normals must be finite");
        }
        Ok(HPolytope { n, normals, label: label.into() })
    }

    pub fn num_normals(&self) -> usize {
        self.normals.len() / self.n
    }

    pub fn normal_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.normals.chunks_exact(self.n)
    }

    /// `max_j |<u_j, y>|`, the gauge of the body.
    pub fn gauge(&self, y: &[f64]) -> f64 {
        self.normal_rows().fold(0.0f64, |a, u| a.max(dot(u, y).abs()))
    }

    pub fn is_bounded(&self) -> bool {
        span_rank(&DMatrix::from_row_slice(self.num_normals(), self.n, &self.normals)) == self.n
    }

    /// Interval of `t` with `x + t d` inside, or `None` if the line leaves no bounded chord.
    pub fn chord(&self, x: &[f64], d: &[f64]) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for u in self.normal_rows() {
            let a = dot(u, x);
            let b = dot(u, d);
            if b.abs() < 1e-15 {
                continue;
            }
            let (t1, t2) = ((-1.0 - a) / b, (1.0 - a) / b);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
        (lo.is_finite() && hi.is_finite() && lo <= hi).then_some((lo, hi))
    }
}

/// Calibration constants of the random models, supplied as inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConstants {
    pub a: f64,
    pub b: f64,
    pub eps0: f64,
    pub c1_split: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        ModelConstants { a: 0.5, b: 3.0, eps0: 0.3, c1_split: 0.5 }
    }
}

impl ModelConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.eps0 > 0.0 && self.c1_split > 0.0) {
            return invalid("model constants must be positive");
        }
        if self.a > self.b {
            return invalid(format!("model constant a = {} exceeds b = {}", self.a, self.b));
        }
        Ok(())
    }

    /// Block size `s = ⌈c1_split · n⌉`.
    pub fn split(&self, n: usize) -> usize {
        (self.c1_split * n as f64).ceil() as usize
    }

    /// Constants realised by a sample: `a` from the inradius of the first `s` points, `b` and
    /// `eps0` from the extreme lengths relative to `√n`.
    pub fn measure(samples: &SampleSet, c1_split: f64, seed: RngSeed) -> Result<ModelConstants> {
        let n = samples.n;
        let sn = (n as f64).sqrt();
        let lens: Vec<f64> = samples.rows().map(norm2).collect();
        let b = lens.iter().cloned().fold(0.0, f64::max) / sn;
        let eps0 = lens.iter().cloned().fold(f64::INFINITY, f64::min) / sn;
        let s = ((c1_split * n as f64).ceil() as usize).clamp(1, samples.m);
        let head = VPolytope::new(n, samples.points[..s * n].to_vec(), "B_s")?;
        let a = if head.full_dimensional {
            inradius_estimate(&head, 2000, 200, seed)?.inradius
        } else {
            0.0
        };
        Ok(ModelConstants { a, b, eps0, c1_split })
    }
}

/// Basis-enriched model: `absconv{e_1, ..., e_n, x_1/√n, ..., x_m/√n}`.
pub fn build_basis_enriched(samples: &SampleSet) -> VPolytope {
    let n = samples.n;
    let scale = 1.0 / (n as f64).sqrt();
    let mut g = VPolytope::cross_polytope(n).generators;
    g.extend(samples.points.iter().map(|x| x * scale));
    VPolytope { n, generators: g, label: format!("basis_enriched(m={})", samples.m), full_dimensional: true }
}

/// Pure model: `absconv{x_1, ..., x_m}`.
pub fn build_pure(samples: &SampleSet) -> VPolytope {
    let g = DMatrix::from_row_slice(samples.m, samples.n, &samples.points);
    VPolytope {
        n: samples.n,
        generators: samples.points.clone(),
        label: format!("pure(m={})", samples.m),
        full_dimensional: span_rank(&g) == samples.n,
    }
}

/// Minkowski functional of `P` at `z`, by the signed-coefficient LP.
pub fn minkowski_norm(p: &VPolytope, z: &[f64]) -> Result<f64> {
    minkowski_norm_with(p, z, &LpOptions::default())
}

pub fn minkowski_norm_with(p: &VPolytope, z: &[f64], opts: &LpOptions) -> Result<f64> {
    if z.len() != p.n {
        return invalid(format!("point has length {}, expected {}", z.len(), p.n));
    }
    if z.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let k = p.num_generators();
    let n = p.n;
    // equality rows expressed in an orthonormal frame of the span when P is flat
    let (rows, rhs): (Vec<Vec<f64>>, Vec<f64>) = if p.full_dimensional {
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::with_capacity(2 * k);
                r.extend((0..k).map(|j| p.generators[j * n + i]));
                r.extend((0..k).map(|j| -p.generators[j * n + i]));
                r
            })
            .collect();
        (rows, z.to_vec())
    } else {
        let q = p.span_basis();
        let coords: Vec<f64> = (0..q.nrows()).map(|r| (0..n).map(|c| q[(r, c)] * z[c]).sum()).collect();
        let resid: f64 = (0..n)
            .map(|c| {
                let back: f64 = (0..q.nrows()).map(|r| q[(r, c)] * coords[r]).sum();
                (z[c] - back).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        if resid > 1e-8 * norm2(z).max(1.0) {
            return Err(GlabError::UnreachablePoint(resid));
        }
        let rows = (0..q.nrows())
            .map(|r| {
                let proj: Vec<f64> = p.generator_rows().map(|g| (0..n).map(|c| q[(r, c)] * g[c]).sum()).collect();
                let mut row = proj.clone();
                row.extend(proj.iter().map(|x| -x));
                row
            })
            .collect();
        (rows, coords)
    };
    let mut lp = LpProblem::new(vec![1.0; 2 * k]);
    lp.bounds = vec![VarBound::Lower(0.0); 2 * k];
    for (r, b) in rows.into_iter().zip(rhs) {
        lp.add_eq(r, b);
    }
    let sol = solve_lp_with(&lp, opts)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        LpStatus::Infeasible => Err(GlabError::UnreachablePoint(f64::NAN)),
        LpStatus::Unbounded => Err(GlabError::NumericalFailure("norm LP reported unbounded".into())),
    }
}

/// `h_P(y) = max_j |<g_j, y>|`.
pub fn support_function(p: &VPolytope, y: &[f64]) -> f64 {
    p.generator_rows().fold(0.0f64, |a, g| a.max(dot(g, y).abs()))
}

/// `P°`, whose normals are the generators of `P`.
pub fn polar(p: &VPolytope) -> Result<HPolytope> {
    if !p.full_dimensional {
        return Err(GlabError::UnboundedPolar);
    }
    HPolytope::new(p.n, p.generators.clone(), format!("polar({})", p.label))
}

pub fn membership(h: &HPolytope, y: &[f64]) -> bool {
    h.gauge(y) <= 1.0 + 1e-12
}

/// The polar of a polygon or 3-polytope as a `VPolytope`: the absolute hull of its facet vectors.
pub fn polar_vertices(p: &VPolytope) -> Result<VPolytope> {
    let f = facets::enumerate_facets(p.n, &p.generators)?;
    VPolytope::new(p.n, f.normals, format!("polar({})", p.label))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InradiusReport {
    /// Exact for `n <= 3`, otherwise an upper bound of the true inradius.
    pub inradius: f64,
    pub circumradius: f64,
    pub exact: bool,
}

/// Inradius of `P` (exact by facets in `n <= 3`) and its exact circumradius.
pub fn inradius_estimate(p: &VPolytope, directions: usize, refine_steps: usize, seed: RngSeed) -> Result<InradiusReport> {
    if !p.full_dimensional {
        return Err(GlabError::UnboundedPolar);
    }
    let circumradius = p.circumradius();
    if p.n <= 2 || (p.n == 3 && p.num_generators() <= facets::MAX_FACET_GENERATORS) {
        let f = facets::enumerate_facets(p.n, &p.generators)?;
        return Ok(InradiusReport { inradius: f.inradius(), circumradius, exact: true });
    }
    Ok(InradiusReport { inradius: inradius_sampled(p, directions, refine_steps, seed), circumradius, exact: false })
}

/// Minimum of `h_P` over sampled unit directions, each of the best few refined by a shrinking
/// random local search. Always an upper bound of the inradius.
pub fn inradius_sampled(p: &VPolytope, directions: usize, refine_steps: usize, seed: RngSeed) -> f64 {
    let n = p.n;
    let mut rng = seed.rng();
    let mut cands: Vec<(f64, Vec<f64>)> = (0..directions.max(1))
        .map(|_| {
            let u = random_unit(&mut rng, n);
            (support_function(p, &u), u)
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    cands.truncate(16);
    let mut best = cands[0].0;
    for (mut val, mut u) in cands {
        let mut step = 0.1;
        for _ in 0..refine_steps {
            let w = random_unit(&mut rng, n);
            let mut v: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + step * b).collect();
            let len = norm2(&v);
            v.iter_mut().for_each(|x| *x /= len);
            let h = support_function(p, &v);
            if h < val {
                val = h;
                u = v;
                step *= 1.2;
            } else {
                step *= 0.9;
            }
            step = step.max(1e-9);
        }
        best = best.min(val);
    }
    best
}

/// Uniform random point of `rng` on the unit sphere, re-exported for callers without `linalg`.
pub fn sphere_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    random_unit(rng, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> VPolytope {
        VPolytope::new(2, vec![1.0, 1.0, 1.0, -1.0], "square").unwrap()
    }

    #[test]
    fn basis_enriched_examples() {
        let zero = SampleSet::from_rows(&[vec![0.0, 0.0]], "zero", RngSeed::new(0)).unwrap();
        let b = build_basis_enriched(&zero);
        assert_abs_diff_eq!(minkowski_norm(&b, &[0.3, -0.4]).unwrap(), 0.7, epsilon = 1e-9);
        let s = SampleSet::from_rows(&[vec![2f64.sqrt(), 2f64.sqrt()]], "x", RngSeed::new(0)).unwrap();
        let b = build_basis_enriched(&s);
        assert_abs_diff_eq!(b.generator(2)[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.generator(2)[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_model_rank_flag() {
        let seg = SampleSet::from_rows(&[vec![1.0, 2.0]], "x", RngSeed::new(0)).unwrap();
        let p = build_pure(&seg);
        assert!(!p.full_dimensional);
        assert_abs_diff_eq!(minkowski_norm(&p, &[0.5, 1.0]).unwrap(), 0.5, epsilon = 1e-9);
        assert!(matches!(minkowski_norm(&p, &[1.0, 0.0]), Err(GlabError::UnreachablePoint(_))));
    }

    #[test]
    fn norm_examples() {
        let b1 = VPolytope::cross_polytope(2);
        assert_abs_diff_eq!(minkowski_norm(&b1, &[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(minkowski_norm(&square(), &[1.0, 0.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(minkowski_norm(&square(), &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(support_function(&b1, &[1.0, 2.0]), 2.0);
    }

    #[test]
    fn polar_and_membership() {
        let h = polar(&VPolytope::cross_polytope(2)).unwrap();
        assert!(membership(&h, &[1.0, 1.0]));
        assert!(!membership(&h, &[1.001, 0.0]));
        assert!(membership(&h, &[0.0, 0.0]));
        let flat = VPolytope::new(2, vec![1.0, 0.0], "seg").unwrap();
        assert_eq!(polar(&flat), Err(GlabError::UnboundedPolar));
    }

    #[test]
    fn inradius_examples() {
        let r = inradius_estimate(&VPolytope::cross_polytope(2), 10_000, 50, RngSeed::new(1)).unwrap();
        assert!(r.exact);
        assert_abs_diff_eq!(r.inradius, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        let s = inradius_sampled(&VPolytope::cross_polytope(2), 10_000, 50, RngSeed::new(1));
        assert!(s >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12 && s < std::f64::consts::FRAC_1_SQRT_2 + 1e-3);
        let sq = inradius_estimate(&square(), 100, 10, RngSeed::new(1)).unwrap();
        assert_abs_diff_eq!(sq.inradius, 1.0, epsilon = 1e-12);
        assert_eq!(VPolytope::cross_polytope(5).circumradius(), 1.0);
    }

    #[test]
    fn simplex_gauge_matches_lp() {
        let mut rng = RngSeed::new(4).rng();
        for n in [2usize, 4, 6] {
            let gens: Vec<f64> = (0..5 * n).flat_map(|_| random_unit(&mut rng, n)).collect();
            let p = VPolytope::new(n, gens, "rand").unwrap();
            let mut g = GaugeOracle::simplex(&p).unwrap();
            for _ in 0..20 {
                let z = random_unit(&mut rng, n);
                let a = g.norm(&z).unwrap();
                let b = minkowski_norm(&p, &z).unwrap();
                assert!((a - b).abs() < 1e-9 * b.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cube_and_polygon_builders() {
        let c = VPolytope::cube(3);
        assert_eq!(c.num_generators(), 4);
        assert_abs_diff_eq!(minkowski_norm(&c, &[0.5, -1.0, 0.25]).unwrap(), 1.0, epsilon = 1e-12);
        let p = VPolytope::regular_polygon(64).unwrap();
        assert_eq!(p.num_generators(), 32);
        assert!(VPolytope::regular_polygon(5).is_err());
    }
}
