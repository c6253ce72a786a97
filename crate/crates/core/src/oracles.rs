//! Slow, independent reference computations for tests and fixtures. Nothing here calls the
//! norm, LP or search code it is meant to check.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GlabError, Result};
use crate::lp::{LpProblem, VarBound};
use crate::operators::LinearMap;
use crate::polytope::VPolytope;
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub method: String,
    pub resolution: BTreeMap<String, f64>,
}

fn support(gens: &[f64], n: usize, y: &[f64]) -> f64 {
    gens.chunks_exact(n).map(|g| g.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max)
}

/// `sup_y h_A(Tᵀy) / h_B(y)` over sampled directions, followed by a shrinking local search
/// around the best few. Every candidate is a feasible value, so the result never exceeds
/// `‖T : X_A → X_B‖`.
pub fn opnorm_sphere_oracle(t: &LinearMap, a: &VPolytope, b: &VPolytope, directions: usize, seed: RngSeed) -> Result<OracleResult> {
    let n = t.n;
    if a.n != n || b.n != n {
        return invalid("map and polytope dimensions differ");
    }
    let rows = t.rows();
    let ratio = |y: &[f64]| {
        let ty: Vec<f64> = (0..n).map(|c| (0..n).map(|r| rows[r][c] * y[r]).sum()).collect();
        let hb = support(&b.generators, n, y);
        if hb > 0.0 {
            support(&a.generators, n, &ty) / hb
        } else {
            0.0
        }
    };
    let mut rng = seed.rng();
    let mut top: Vec<(f64, Vec<f64>)> = Vec::new();
    const KEEP: usize = 8;
    for _ in 0..directions {
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let v = ratio(&y);
        if top.len() < KEEP || v > top[KEEP - 1].0 {
            top.push((v, y));
            top.sort_by(|p, q| q.0.total_cmp(&p.0));
            top.truncate(KEEP);
        }
    }
    let refine_steps = 2000;
    let mut best = top.first().map_or(0.0, |p| p.0);
    for (mut v, mut y) in top {
        let len = y.iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut radius = 0.05 * len;
        for _ in 0..refine_steps {
            let cand: Vec<f64> = y.iter().map(|c| c + radius * rng.sample::<f64, _>(StandardNormal)).collect();
            let cv = ratio(&cand);
            if cv > v {
                v = cv;
                y = cand;
            } else {
                radius *= 0.995;
            }
        }
        best = best.max(v);
    }
    Ok(OracleResult {
        value: best,
        method: "opnorm_sphere_oracle".into(),
        resolution: BTreeMap::from([
            ("directions".into(), directions as f64),
            ("refine_steps".into(), refine_steps as f64),
        ]),
    })
}

/// Counter-clockwise hull by gift wrapping.
fn wrap_hull(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let Some(start) = pts.iter().copied().min_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))) else {
        return Vec::new();
    };
    let mut hull = vec![start];
    let mut cur = start;
    loop {
        let mut next = pts[0];
        for &p in pts {
            if next == cur {
                next = p;
                continue;
            }
            let c = cross(cur, next, p);
            if c < 0.0 || (c == 0.0 && d2(cur, p) > d2(cur, next)) {
                next = p;
            }
        }
        if next == start || hull.len() > pts.len() {
            break;
        }
        hull.push(next);
        cur = next;
    }
    hull
}

struct Polygon {
    verts: Vec<[f64; 2]>,
}

impl Polygon {
    fn new(p: &VPolytope) -> Self {
        let pts: Vec<[f64; 2]> = p.generator_rows().flat_map(|g| [[g[0], g[1]], [-g[0], -g[1]]]).collect();
        Polygon { verts: wrap_hull(&pts) }
    }

    /// Gauge by casting the ray `s z` against every edge.
    fn gauge(&self, z: [f64; 2]) -> f64 {
        let k = self.verts.len();
        let mut best = 0.0f64;
        for i in 0..k {
            let (p, q) = (self.verts[i], self.verts[(i + 1) % k]);
            let e = [q[0] - p[0], q[1] - p[1]];
            let den = z[0] * e[1] - z[1] * e[0];
            if den.abs() < 1e-300 {
                continue;
            }
            // z s = p + λ e  ⇒  s = (p × e) / (z × e)
            let s = (p[0] * e[1] - p[1] * e[0]) / den;
            if s > 0.0 {
                best = best.max(1.0 / s);
            }
        }
        best
    }

    fn op_norm(&self, t: [[f64; 2]; 2], target: &Polygon) -> f64 {
        self.verts
            .iter()
            .map(|v| target.gauge([t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1]]))
            .fold(0.0, f64::max)
    }

    fn radii(&self) -> (f64, f64) {
        let outer = self.verts.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        let k = self.verts.len();
        let inner = (0..k)
            .map(|i| {
                let (p, q) = (self.verts[i], self.verts[(i + 1) % k]);
                (p[0] * q[1] - p[1] * q[0]).abs() / (q[0] - p[0]).hypot(q[1] - p[1])
            })
            .fold(f64::INFINITY, f64::min);
        (inner, outer)
    }
}

/// Smallest distortion over a grid of `R(θ) [[1, s], [0, 1]] diag(r, 1/r)`, both orientations.
/// `θ ∈ [0, π)`, `ln r ∈ [-L, L]`, `s ∈ [-S, S]` with `L, S` from the in/circumradii and
/// `d ≤ 2` in the plane. An upper bound of `d_BM`; the grid spacings are reported.
pub fn bm_grid_oracle_2d(x: &VPolytope, y: &VPolytope, grid_resolution: usize) -> Result<OracleResult> {
    if x.n != 2 || y.n != 2 {
        return Err(GlabError::UnsupportedDimension(x.n.max(y.n), "grid oracle is planar".into()));
    }
    if grid_resolution < 8 {
        return Err(GlabError::TooCoarse(grid_resolution));
    }
    let (px, py) = (Polygon::new(x), Polygon::new(y));
    if px.verts.len() < 3 || py.verts.len() < 3 {
        return invalid("both bodies must be full-dimensional");
    }
    let ((rx, cx), (ry, cy)) = (px.radii(), py.radii());
    let sigma_max = (2.0 * cx * cy / (rx * ry)).sqrt();
    let l = sigma_max.ln();
    let s_max = sigma_max * sigma_max;
    let g = grid_resolution;
    // symmetric grids through 0 for shear and log-scale
    let h = g / 2;
    let mut best = f64::INFINITY;
    for i in 0..g {
        let th = PI * i as f64 / g as f64;
        let (sn, cs) = th.sin_cos();
        for j in 0..=2 * h {
            let sh = s_max * (j as f64 / h as f64 - 1.0);
            for k in 0..=2 * h {
                let r = (l * (k as f64 / h as f64 - 1.0)).exp();
                // R · Sh · D
                let m = [[r, sh / r], [0.0, 1.0 / r]];
                let t = [[cs * m[0][0] - sn * m[1][0], cs * m[0][1] - sn * m[1][1]], [sn * m[0][0] + cs * m[1][0], sn * m[0][1] + cs * m[1][1]]];
                for flip in [1.0, -1.0] {
                    let t = [[t[0][0], flip * t[0][1]], [t[1][0], flip * t[1][1]]];
                    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
                    let inv = [[t[1][1] / det, -t[0][1] / det], [-t[1][0] / det, t[0][0] / det]];
                    let v = px.op_norm(t, &py) * py.op_norm(inv, &px);
                    best = best.min(v);
                }
            }
        }
    }
    let spacing = [PI / g as f64, s_max / h as f64, l / h as f64];
    Ok(OracleResult {
        value: best,
        method: "bm_grid_oracle_2d".into(),
        resolution: BTreeMap::from([
            ("grid_resolution".into(), g as f64),
            ("theta_spacing".into(), spacing[0]),
            ("shear_spacing".into(), spacing[1]),
            ("log_scale_spacing".into(), spacing[2]),
        ]),
    })
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, `g = 7`).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `(E|g|^p)^{1/p}` for a standard Gaussian `g`.
pub fn gaussian_moment_oracle(p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return invalid("p must be >= 1");
    }
    let ln_m = 0.5 * p * 2f64.ln() + ln_gamma(0.5 * (p + 1.0)) - 0.5 * PI.ln();
    Ok((ln_m / p).exp())
}

/// Regularized upper incomplete gamma `Q(a, x)`: power series below `a + 1`, Lentz continued
/// fraction above.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let front = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        let (mut term, mut sum, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * front).max(0.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        front * h
    }
}

/// `P(χ²_n ≥ threshold)`.
pub fn chi2_tail_oracle(n: usize, threshold: f64) -> Result<f64> {
    if n == 0 || !(threshold >= 0.0) {
        return invalid("need n >= 1 and threshold >= 0");
    }
    Ok(gamma_q(0.5 * n as f64, 0.5 * threshold))
}

/// Minimum of a bounded LP by enumerating every basic solution: each choice of `v - e` active
/// inequalities (rows or variable bounds) together with the `e` equalities is solved directly.
/// Exponential in the row count; meant for a handful of constraints.
pub fn lp_vertex_oracle(problem: &LpProblem) -> Result<OracleResult> {
    let v = problem.objective.len();
    let e = problem.eq_matrix.len();
    if v == 0 || problem.bounds.len() != v {
        return invalid("objective and bounds must have the same positive length");
    }
    // inequality-like constraints as (row, rhs) with row·x <= rhs
    let mut rows: Vec<(Vec<f64>, f64)> =
        problem.ineq_matrix.iter().cloned().zip(problem.ineq_rhs.iter().copied()).collect();
    for (j, b) in problem.bounds.iter().enumerate() {
        if let VarBound::Lower(l) = b {
            let mut r = vec![0.0; v];
            r[j] = -1.0;
            rows.push((r, -l));
        }
    }
    if e > v || rows.len() < v - e {
        return invalid("too few constraints to define a vertex");
    }
    let pick = v - e;
    let combos = binomial(rows.len(), pick);
    if combos > 2e6 {
        return invalid(format!("{combos:.0} bases is too many to enumerate"));
    }
    let scale = rows
        .iter()
        .map(|r| r.1.abs())
        .chain(problem.eq_rhs.iter().map(|b| b.abs()))
        .fold(1.0f64, f64::max);
    let feas = 1e-9 * scale;
    let mut best = f64::INFINITY;
    let mut vertices = 0usize;
    let mut idx: Vec<usize> = (0..pick).collect();
    loop {
        let mut a = nalgebra::DMatrix::<f64>::zeros(v, v);
        let mut rhs = nalgebra::DVector::<f64>::zeros(v);
        for (i, (row, b)) in problem.eq_matrix.iter().zip(&problem.eq_rhs).enumerate() {
            a.row_mut(i).copy_from_slice(row);
            rhs[i] = *b;
        }
        for (k, &r) in idx.iter().enumerate() {
            a.row_mut(e + k).copy_from_slice(&rows[r].0);
            rhs[e + k] = rows[r].1;
        }
        if let Some(x) = a.clone().lu().solve(&rhs) {
            let residual = (&a * &x - &rhs).amax();
            if x.iter().all(|v| v.is_finite()) && residual <= 1e-9 * scale {
                let dot = |row: &[f64]| row.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>();
                let ok = rows.iter().all(|(row, b)| dot(row) <= b + feas)
                    && problem.eq_matrix.iter().zip(&problem.eq_rhs).all(|(row, b)| (dot(row) - b).abs() <= feas);
                if ok {
                    vertices += 1;
                    best = best.min(dot(&problem.objective));
                }
            }
        }
        // next combination in lexicographic order
        let mut k = pick;
        loop {
            if k == 0 {
                let mut resolution = BTreeMap::new();
                resolution.insert("bases".to_string(), combos);
                resolution.insert("feasible_vertices".to_string(), vertices as f64);
                return Ok(OracleResult { value: best, method: "lp_vertex_enumeration".into(), resolution });
            }
            k -= 1;
            if idx[k] < rows.len() - pick + k {
                idx[k] += 1;
                for j in k + 1..pick {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vertex_oracle_small_lps() {
        let mut p = LpProblem::new(vec![1.0, 1.0]);
        p.add_ge(vec![1.0, 1.0], 1.0);
        assert_abs_diff_eq!(lp_vertex_oracle(&p).unwrap().value, 1.0, epsilon = 1e-12);
        let mut q = LpProblem::new(vec![-1.0, -2.0]);
        q.add_le(vec![1.0, 1.0], 4.0);
        q.add_le(vec![1.0, 3.0], 6.0);
        // optimum at (3, 1)
        assert_abs_diff_eq!(lp_vertex_oracle(&q).unwrap().value, -5.0, epsilon = 1e-12);
        let mut r = LpProblem::new(vec![0.0]);
        r.add_le(vec![1.0], -1.0);
        assert_eq!(lp_vertex_oracle(&r).unwrap().value, f64::INFINITY);
    }

    #[test]
    fn gamma_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.5), PI.sqrt().ln(), epsilon = 1e-14);
    }

    #[test]
    fn gaussian_moments() {
        assert_abs_diff_eq!(gaussian_moment_oracle(2.0).unwrap(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gaussian_moment_oracle(1.0).unwrap(), (2.0 / PI).sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(gaussian_moment_oracle(4.0).unwrap(), 3f64.powf(0.25), epsilon = 1e-13);
        assert!(gaussian_moment_oracle(0.5).is_err());
    }

    #[test]
    fn chi2_even_degrees_match_poisson_sums() {
        // Q(k, x) = e^{-x} Σ_{j<k} x^j / j!
        for &(n, thr) in &[(2usize, 2.0 * 2f64.ln()), (4, 3.0), (8, 72.0), (6, 0.3), (10, 25.0)] {
            let (k, x) = (n / 2, thr / 2.0);
            let mut term = 1.0;
            let mut sum = 0.0;
            for j in 0..k {
                if j > 0 {
                    term *= x / j as f64;
                }
                sum += term;
            }
            let exact = (-x).exp() * sum;
            assert_abs_diff_eq!(chi2_tail_oracle(n, thr).unwrap(), exact, epsilon = 1e-12);
        }
        assert_eq!(chi2_tail_oracle(3, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(chi2_tail_oracle(2, 2.0 * 2f64.ln()).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn chi2_odd_degree_one() {
        // P(χ²_1 ≥ 1) = 2(1 - Φ(1)) = 0.31731050786291415
        assert_abs_diff_eq!(chi2_tail_oracle(1, 1.0).unwrap(), 0.317_310_507_862_914_15, epsilon = 1e-12);
    }

    #[test]
    fn sphere_oracle_is_one_sided() {
        let b1 = VPolytope::cross_polytope(2);
        let r = opnorm_sphere_oracle(&LinearMap::identity(2), &b1, &b1, 20_000, RngSeed::new(1)).unwrap();
        assert!(r.value <= 1.0 + 1e-12 && r.value >= 0.999);
    }

    #[test]
    fn grid_oracle_examples() {
        let b1 = VPolytope::cross_polytope(2);
        assert!(matches!(bm_grid_oracle_2d(&b1, &b1, 4), Err(GlabError::TooCoarse(4))));
        let same = bm_grid_oracle_2d(&b1, &b1, 9).unwrap();
        assert!((same.value - 1.0).abs() < 1e-12);
        let sq = bm_grid_oracle_2d(&b1, &VPolytope::cube(2), 16).unwrap();
        assert!((sq.value - 1.0).abs() < 1e-9, "{}", sq.value);
    }

    #[test]
    fn hull_of_square() {
        let h = wrap_hull(&[[1.0, 1.0], [-1.0, 1.0], [0.0, 0.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 0.0]]);
        assert_eq!(h.len(), 4);
    }
}
