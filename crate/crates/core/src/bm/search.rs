use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::certify::{bm_lower_certified, CertifyOptions};
use super::BmEstimate;
use crate::error::{invalid, GlabError, Result};
use crate::linalg::{dot, mat_vec, random_gaussian_matrix};
use crate::lp::{solve_lp, LpProblem, LpStatus, VarBound};
use crate::operators::{det_normalize, op_norm_with, LinearMap};
use crate::polytope::facets::enumerate_facets;
use crate::polytope::{GaugeOracle, VPolytope};
use crate::rng::{map_trials, RngSeed};

const MIN_STEP: f64 = 1e-10;

/// Multistart compass search for `min ‖T : X → Y‖ · ‖T⁻¹ : Y → X‖`.
///
/// Each restart fixes a start `T₀` and searches `T = T₀ Q R` with `Q` a product of Givens
/// rotations and `R` upper triangular with `det R = 1` (log-diagonal parameters recentred after
/// every move). Restart 0 starts at the identity, restart 1 at the map matching the generator
/// second-moment matrices, later restarts at that map composed with a random orthogonal one.
/// In dimensions up to 3 each restart is then polished by sequential linear programming on the
/// active vertex/facet pairs. In the plane the best box centre of a short branch-and-bound run
/// over all unimodular maps is polished as well.
pub fn bm_upper_search(x: &VPolytope, y: &VPolytope, restarts: usize, steps: usize, seed: RngSeed) -> Result<BmEstimate> {
    if x.n != y.n {
        return invalid("X and Y live in different dimensions");
    }
    if !x.full_dimensional || !y.full_dimensional {
        return invalid("both bodies must be full-dimensional");
    }
    let n = x.n;
    // the distance is a similarity invariant, so search on a canonical representative of the pair
    let frame = canonical_frame(&x.reduced()?);
    let frame_inv = frame.clone().try_inverse().ok_or(GlabError::SingularMap(0.0))?;
    let xr = x.mapped(&frame)?.reduced()?;
    let yr = y.mapped(&frame)?.reduced()?;
    let ox = GaugeOracle::new(&xr)?;
    let oy = GaugeOracle::new(&yr)?;
    let align = moment_alignment(&xr, &yr);
    let facets = if n <= 3 {
        match (enumerate_facets(n, &xr.generators), enumerate_facets(n, &yr.generators)) {
            (Ok(fx), Ok(fy)) => Some((fx.normals, fy.normals)),
            _ => None,
        }
    } else {
        None
    };
    let base = restarts.max(1);
    let runs = map_trials(base, |r| {
        let mut rng = seed.trial(r).rng();
        let t0 = match r as usize {
            0 => DMatrix::identity(n, n),
            1 => align.clone(),
            _ => &align * random_orthogonal(&mut rng, n),
        };
        let mut obj = Objective { x: &xr, y: &yr, ox: ox.clone(), oy: oy.clone() };
        let (v, t) = compass(&mut obj, &t0, steps, &mut rng);
        match &facets {
            Some((fx, fy)) => polish(&xr, &yr, fx, fy, t, v),
            None => (v, t),
        }
    });
    let (mut best_val, best_t) = runs
        .into_iter()
        .fold((f64::INFINITY, None), |(bv, bt), (v, t)| if v < bv { (v, Some(t)) } else { (bv, bt) });
    let mut best_t = best_t.ok_or_else(|| GlabError::NumericalFailure("every restart failed".into()))?;
    if let (2, Some((fx, fy))) = (n, &facets) {
        let opts = CertifyOptions { net_resolution: 0.1, refine_budget: 200_000, upper_hint: Some(best_val.max(1.0)) };
        let global = bm_lower_certified(&xr, &yr, &opts, seed)?;
        let starts: Vec<DMatrix<f64>> =
            std::iter::once(&global.center_witness).chain(&global.frontier).map(|w| w.matrix.clone()).collect();
        let polished = map_trials(starts.len(), |i| {
            let t = starts[i as usize].clone();
            let v = Objective { x: &xr, y: &yr, ox: ox.clone(), oy: oy.clone() }.eval(&t);
            polish(&xr, &yr, fx, fy, t, v)
        });
        for (v, t) in polished {
            if v < best_val {
                best_val = v;
                best_t = t;
            }
        }
    }
    let witness = det_normalize(&LinearMap::new(&frame_inv * best_t * &frame)?)?;
    Ok(BmEstimate {
        upper: best_val.max(1.0),
        upper_witness: witness,
        lower: 1.0,
        lower_method: "trivial (d >= 1)".into(),
    })
}

struct Objective<'a> {
    x: &'a VPolytope,
    y: &'a VPolytope,
    ox: GaugeOracle<'a>,
    oy: GaugeOracle<'a>,
}

impl Objective<'_> {
    fn eval(&mut self, t: &DMatrix<f64>) -> f64 {
        let Some(inv) = t.clone().try_inverse() else { return f64::INFINITY };
        let a = op_norm_with(t, self.x, &mut self.oy);
        let b = op_norm_with(&inv, self.y, &mut self.ox);
        match (a, b) {
            (Ok(a), Ok(b)) if (a * b).is_finite() => a * b,
            _ => f64::INFINITY,
        }
    }
}

/// Parameter layout: `n(n-1)/2` rotation angles, `n` log-diagonal entries, `n(n-1)/2`
/// strictly upper entries.
fn assemble(t0: &DMatrix<f64>, p: &[f64], n: usize) -> DMatrix<f64> {
    let pairs = n * (n - 1) / 2;
    let mut q = DMatrix::identity(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let (s, c) = p[idx].sin_cos();
            idx += 1;
            for r in 0..n {
                let (a, b) = (q[(r, i)], q[(r, j)]);
                q[(r, i)] = c * a - s * b;
                q[(r, j)] = s * a + c * b;
            }
        }
    }
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = p[pairs + i].exp();
    }
    let mut idx = pairs + n;
    for i in 0..n {
        for j in i + 1..n {
            r[(i, j)] = p[idx];
            idx += 1;
        }
    }
    t0 * q * r
}

fn recentre(p: &mut [f64], n: usize) {
    let pairs = n * (n - 1) / 2;
    let mean = p[pairs..pairs + n].iter().sum::<f64>() / n as f64;
    p[pairs..pairs + n].iter_mut().for_each(|v| *v -= mean);
}

fn compass<R: Rng>(obj: &mut Objective, t0: &DMatrix<f64>, sweeps: usize, rng: &mut R) -> (f64, DMatrix<f64>) {
    let n = t0.nrows();
    let dim = n * n;
    let mut p = vec![0.0; dim];
    let mut best = obj.eval(t0);
    let mut step = 0.25;
    let mut order: Vec<usize> = (0..dim).collect();
    for _ in 0..sweeps {
        order.shuffle(rng);
        let mut dirs: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| {
                let mut d = vec![0.0; dim];
                d[i] = 1.0;
                d
            })
            .collect();
        for _ in 0..2 {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            dirs.push(g.into_iter().map(|v| v / len).collect());
        }
        let mut improved = false;
        for d in &dirs {
            for sign in [1.0, -1.0] {
                let mut cand: Vec<f64> = p.iter().zip(d).map(|(a, b)| a + sign * step * b).collect();
                recentre(&mut cand, n);
                let v = obj.eval(&assemble(t0, &cand, n));
                if v < best {
                    best = v;
                    p = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }
    }
    (best, assemble(t0, &p, n))
}

struct Pairs {
    value: f64,
    /// `(value, gradient)` of every pair within the active band.
    active: Vec<(f64, Vec<f64>)>,
}

/// `max |<f, T v>|` over vertices `v` and facet vectors `f`, with the gradients in `T` of the
/// pairs whose value lies within `band` of the maximum.
fn pairs(t: &DMatrix<f64>, verts: &VPolytope, facets: &[f64], band: f64) -> Pairs {
    let n = verts.n;
    let images: Vec<Vec<f64>> = verts.generator_rows().map(|v| mat_vec(t, v)).collect();
    let mut value = 0.0f64;
    for z in &images {
        for f in facets.chunks_exact(n) {
            value = value.max(dot(f, z).abs());
        }
    }
    let mut active = Vec::new();
    for (z, v) in images.iter().zip(verts.generator_rows()) {
        for f in facets.chunks_exact(n) {
            let val = dot(f, z);
            if val.abs() >= value * (1.0 - band) {
                let s = val.signum();
                let grad = (0..n * n).map(|k| s * f[k / n] * v[k % n]).collect();
                active.push((val.abs(), grad));
            }
        }
    }
    Pairs { value, active }
}

/// Sequential LP with a box trust region on `ΔT` for `log a(T) + log b(T)`, where `a` and `b`
/// are maxima of vertex/facet pairs. `T⁻¹` is linearised as `T⁻¹ - T⁻¹ ΔT T⁻¹`.
fn polish(x: &VPolytope, y: &VPolytope, fx: &[f64], fy: &[f64], t: DMatrix<f64>, v: f64) -> (f64, DMatrix<f64>) {
    let n = x.n;
    let nn = n * n;
    let exact = |t: &DMatrix<f64>| -> f64 {
        match t.clone().try_inverse() {
            Some(inv) => pairs(t, x, fy, 0.0).value * pairs(&inv, y, fx, 0.0).value,
            None => f64::INFINITY,
        }
    };
    let mut best = v.min(exact(&t));
    let mut t = t;
    if !best.is_finite() {
        return (v, t);
    }
    let mut rho = 0.05 * t.amax();
    for _ in 0..400 {
        let Some(inv) = t.clone().try_inverse() else { break };
        let pa = pairs(&t, x, fy, 0.1);
        let raw_b = pairs(&inv, y, fx, 0.1);
        // chain rule through the inverse: d<g, T⁻¹ w> = -<T⁻ᵀ g, ΔT T⁻¹ w>
        let pb: Vec<(f64, Vec<f64>)> = raw_b
            .active
            .into_iter()
            .map(|(val, h)| {
                let hm = DMatrix::from_row_slice(n, n, &h);
                let g = -(inv.transpose() * hm * inv.transpose());
                (val, g.transpose().as_slice().to_vec())
            })
            .collect();
        let (a0, b0) = (pa.value, raw_b.value);
        let mut obj = vec![0.0; nn + 2];
        obj[nn] = 1.0 / a0;
        obj[nn + 1] = 1.0 / b0;
        let mut lp = LpProblem::new(obj);
        for k in 0..nn {
            lp.bounds[k] = VarBound::Lower(-rho);
            let mut row = vec![0.0; nn + 2];
            row[k] = 1.0;
            lp.add_le(row, rho);
        }
        lp.bounds[nn] = VarBound::Free;
        lp.bounds[nn + 1] = VarBound::Free;
        for (slot, list) in [(nn, &pa.active), (nn + 1, &pb)] {
            for (val, g) in list {
                let mut row = g.clone();
                row.extend([0.0, 0.0]);
                row[slot] = -1.0;
                lp.add_le(row, -val);
            }
        }
        let step = match solve_lp(&lp) {
            Ok(sol) if sol.status == LpStatus::Optimal => sol.point,
            _ => break,
        };
        let delta = DMatrix::from_row_slice(n, n, &step[..nn]);
        let cand = &t + delta;
        let c = exact(&cand);
        if c < best * (1.0 - 1e-15) {
            best = c;
            let d = cand.determinant().abs().powf(1.0 / n as f64);
            t = cand / d;
            rho = (2.0 * rho).min(0.5 * t.amax());
        } else {
            rho *= 0.25;
            if rho < 1e-13 * t.amax() {
                break;
            }
        }
    }
    (best, t)
}

/// `A` with `A X` moment-whitened; in the plane also rotated so that the longest vertex lies on
/// the first axis and reflected so that `Σ x³y >= 0`. `canonical_frame(SX) S` is then
/// `canonical_frame(X)` for every invertible `S`, up to ties.
fn canonical_frame(x: &VPolytope) -> DMatrix<f64> {
    let g = x.matrix();
    let e = SymmetricEigen::new(g.transpose() * &g);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(1e-300).powf(-0.5)));
    let w = &e.eigenvectors * d * e.eigenvectors.transpose();
    if x.n != 2 {
        return w;
    }
    let p = &g * &w;
    let far = (0..p.nrows()).max_by(|&a, &b| p.row(a).norm().total_cmp(&p.row(b).norm())).unwrap_or(0);
    let (c, s) = (p[(far, 0)], p[(far, 1)]);
    let r = (c * c + s * s).sqrt().max(1e-300);
    let rot = DMatrix::from_row_slice(2, 2, &[c / r, s / r, -s / r, c / r]);
    let q = &p * rot.transpose();
    let skew: f64 = q.row_iter().map(|v| v[0].powi(3) * v[1]).sum();
    let flip = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, if skew < 0.0 { -1.0 } else { 1.0 }]));
    flip * rot * w
}

/// `M_Y^{1/2} M_X^{-1/2}` for the generator second-moment matrices `M`.
fn moment_alignment(x: &VPolytope, y: &VPolytope) -> DMatrix<f64> {
    let mx = x.matrix().transpose() * x.matrix();
    let my = y.matrix().transpose() * y.matrix();
    let root = |m: DMatrix<f64>, power: f64| {
        let e = SymmetricEigen::new(m);
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(1e-300).powf(power)));
        &e.eigenvectors * d * e.eigenvectors.transpose()
    };
    root(my, 0.5) * root(mx, -0.5)
}

fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let qr = random_gaussian_matrix(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let signs = DMatrix::from_diagonal(&r.diagonal().map(|v| if v < 0.0 { -1.0 } else { 1.0 }));
    q * signs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::distortion;

    #[test]
    fn identical_bodies_give_one() {
        let b = VPolytope::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0], vec![-0.7, 0.9]], "p").unwrap();
        let e = bm_upper_search(&b, &b, 3, 50, RngSeed::new(1)).unwrap();
        assert!((e.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_polytope_and_square_are_isometric() {
        let e = bm_upper_search(&VPolytope::cross_polytope(2), &VPolytope::cube(2), 4, 300, RngSeed::new(2)).unwrap();
        assert!((e.upper - 1.0).abs() < 1e-3, "{}", e.upper);
        assert!((e.upper_witness.det().abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn witness_attains_value() {
        let x = VPolytope::cross_polytope(3);
        let y = VPolytope::cube(3);
        let e = bm_upper_search(&x, &y, 3, 200, RngSeed::new(3)).unwrap();
        let d = distortion(&e.upper_witness, &x, &y).unwrap();
        assert!((d - e.upper).abs() < 1e-9 * e.upper);
    }

    #[test]
    fn assemble_at_zero_is_start() {
        let t0 = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        assert_eq!(assemble(&t0, &[0.0; 4], 2), t0);
    }
}
