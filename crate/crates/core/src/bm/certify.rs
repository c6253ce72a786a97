//! Certified lower bound for `d_BM` in the plane.
//!
//! Every `T` with `|det T| = 1` is, up to the sign `±T`, `R(θ) diag(e^u, e^{-u}) R(φ) J^o` with
//! `θ, φ ∈ [0, π)`, `u ≥ 0`, `o ∈ {0, 1}` and `J = diag(1, -1)`. On a parameter box of half-widths
//! `h` around `T_c`, every partial derivative of `T` and `T⁻¹` has operator norm at most `e^{u_hi}`,
//! so `‖T - T_c‖ ≤ δ = e^{u_hi}(h_θ + h_φ + h_u)`, and likewise for the inverses. Hence
//!
//! `‖T : X → Y‖ ≥ ‖T_c : X → Y‖ - δ R_X / r_Y` and `‖T⁻¹ : Y → X‖ ≥ ‖T_c⁻¹ : Y → X‖ - δ R_Y / r_X`,
//!
//! and the product of the two right-hand sides bounds the distortion on the whole box. Maps with
//! `e^{2u} > U R_X R_Y / (r_X r_Y)` have distortion above any known upper bound `U` and are
//! excluded. Boxes are refined best-first; the minimum box bound is the certificate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::search::bm_upper_search;
use crate::error::{invalid, GlabError, Result};
use crate::polytope::facets::enumerate_facets;
use crate::operators::LinearMap;
use crate::polytope::VPolytope;
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Initial grid spacing in each of `θ, φ, u`.
    pub net_resolution: f64,
    /// Box evaluations allowed after the initial grid.
    pub refine_budget: usize,
    /// A known upper bound of `d_BM`; found by a short search when absent.
    pub upper_hint: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { net_resolution: 0.05, refine_budget: 200_000, upper_hint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedLower {
    /// Guaranteed `≤ d_BM(X, Y)`.
    pub lower: f64,
    /// Smallest distortion seen at a box centre (an upper bound).
    pub best_center: f64,
    /// The `|det| = 1` map attaining `best_center`.
    pub center_witness: LinearMap,
    /// Centres of the open boxes with the smallest bounds, best first.
    pub frontier: Vec<LinearMap>,
    pub upper_used: f64,
    pub u_max: f64,
    pub initial_cells: usize,
    pub evaluations: usize,
    pub method: String,
    pub warning: Option<String>,
}

type P2 = [f64; 2];

struct Planar {
    xv: Vec<P2>,
    xf: Vec<P2>,
    yv: Vec<P2>,
    yf: Vec<P2>,
    /// `R_X / r_Y` and `R_Y / r_X`.
    kx: f64,
    ky: f64,
}

fn rows2(v: &[f64]) -> Vec<P2> {
    v.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

/// One facet vector per `±` pair.
fn half(normals: Vec<P2>) -> Vec<P2> {
    normals.into_iter().filter(|a| a[0] > 0.0 || (a[0] == 0.0 && a[1] > 0.0)).collect()
}

impl Planar {
    fn new(x: &VPolytope, y: &VPolytope) -> Result<Self> {
        let fx = enumerate_facets(2, &x.generators)?;
        let fy = enumerate_facets(2, &y.generators)?;
        let xr = x.reduced()?;
        let yr = y.reduced()?;
        Ok(Planar {
            kx: x.circumradius() / fy.inradius(),
            ky: y.circumradius() / fx.inradius(),
            xv: rows2(&xr.generators),
            yv: rows2(&yr.generators),
            xf: half(rows2(&fx.normals)),
            yf: half(rows2(&fy.normals)),
        })
    }
}

fn op_norm(t: &[[f64; 2]; 2], verts: &[P2], facets: &[P2]) -> f64 {
    let mut best = 0.0f64;
    for v in verts {
        let z = [t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1]];
        for a in facets {
            best = best.max((a[0] * z[0] + a[1] * z[1]).abs());
        }
    }
    best
}

fn mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn rot(a: f64) -> [[f64; 2]; 2] {
    let (s, c) = a.sin_cos();
    [[c, -s], [s, c]]
}

/// `T` and `T⁻¹` at parameters `(θ, φ, u)` and orientation `o`.
fn maps(p: [f64; 3], flip: bool) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let (eu, el) = (p[2].exp(), (-p[2]).exp());
    let mut t = mul(&mul(&rot(p[0]), &[[eu, 0.0], [0.0, el]]), &rot(p[1]));
    let mut inv = mul(&mul(&rot(-p[1]), &[[el, 0.0], [0.0, eu]]), &rot(-p[0]));
    if flip {
        t[0][1] = -t[0][1];
        t[1][1] = -t[1][1];
        inv[1][0] = -inv[1][0];
        inv[1][1] = -inv[1][1];
    }
    (t, inv)
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    c: [f64; 3],
    h: [f64; 3],
    flip: bool,
    lb: f64,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    /// Reversed, so the max-heap pops the smallest bound.
    fn cmp(&self, o: &Self) -> Ordering {
        o.lb.total_cmp(&self.lb)
    }
}

impl Planar {
    /// Distortion at the centre and the certified bound over the box.
    fn evaluate(&self, c: [f64; 3], h: [f64; 3], flip: bool) -> (f64, f64) {
        let (t, inv) = maps(c, flip);
        let a = op_norm(&t, &self.xv, &self.yf);
        let b = op_norm(&inv, &self.yv, &self.xf);
        let delta = (c[2] + h[2]).exp() * (h[0] + h[1] + h[2]);
        let lb = (a - delta * self.kx).max(0.0) * (b - delta * self.ky).max(0.0);
        (a * b, lb * (1.0 - 1e-12))
    }
}

/// Certified `lower ≤ d_BM(X, Y)` for planar bodies.
/// Number of well-separated low-bound boxes returned as search starts.
const FRONTIER: usize = 16;

pub fn bm_lower_certified(x: &VPolytope, y: &VPolytope, opts: &CertifyOptions, seed: RngSeed) -> Result<CertifiedLower> {
    if x.n != 2 || y.n != 2 {
        return Err(GlabError::UnsupportedDimension(x.n.max(y.n), "certified lower bounds are planar only".into()));
    }
    if !x.full_dimensional || !y.full_dimensional {
        return invalid("both bodies must be full-dimensional");
    }
    let t = opts.net_resolution;
    if !(t > 0.0 && t.is_finite()) {
        return invalid("net resolution must be positive");
    }
    let upper = match opts.upper_hint {
        Some(u) if u >= 1.0 => u,
        Some(u) => return invalid(format!("upper hint {u} < 1")),
        None => bm_upper_search(x, y, 4, 200, seed)?.upper,
    };
    let pl = Planar::new(x, y)?;
    let u_max = 0.5 * (upper * pl.kx * pl.ky).ln().max(0.0);

    let nt = (PI / t).ceil().max(1.0) as usize;
    let nu = (u_max / t).ceil().max(1.0) as usize;
    let ht = PI / (2.0 * nt as f64);
    let hu = u_max / (2.0 * nu as f64);
    let mut heap = BinaryHeap::with_capacity(2 * nt * nt * nu + 2 * opts.refine_budget);
    let mut best_center = f64::INFINITY;
    let mut best_at = ([0.0; 3], false);
    for flip in [false, true] {
        for i in 0..nt {
            for j in 0..nt {
                for k in 0..nu {
                    let c = [(2 * i + 1) as f64 * ht, (2 * j + 1) as f64 * ht, (2 * k + 1) as f64 * hu];
                    let h = [ht, ht, hu];
                    let (v, lb) = pl.evaluate(c, h, flip);
                    if v < best_center {
                        best_center = v;
                        best_at = (c, flip);
                    }
                    heap.push(Cell { c, h, flip, lb });
                }
            }
        }
    }
    let initial = heap.len();
    let mut evaluations = initial;
    let mut ceiling = upper.min(best_center);
    let mut spent = 0;
    while spent < opts.refine_budget {
        let Some(cell) = heap.pop() else { break };
        if cell.lb >= ceiling {
            heap.push(cell);
            break;
        }
        let d = (0..3).max_by(|&a, &b| cell.h[a].total_cmp(&cell.h[b])).expect("three axes");
        for s in [-0.5, 0.5] {
            let mut c = cell.c;
            let mut h = cell.h;
            h[d] *= 0.5;
            c[d] += s * cell.h[d];
            let (v, lb) = pl.evaluate(c, h, cell.flip);
            if v < best_center {
                best_center = v;
                best_at = (c, cell.flip);
            }
            ceiling = ceiling.min(v);
            if lb < ceiling {
                heap.push(Cell { c, h, flip: cell.flip, lb });
            }
            spent += 1;
        }
    }
    evaluations += spent;
    let raw = heap.peek().map_or(ceiling, |c| c.lb).min(ceiling);
    let (lower, warning) = if raw < 1.0 {
        (1.0, Some(format!("net too coarse: best box bound {raw:.6} is below the trivial bound 1")))
    } else {
        (raw, None)
    };
    let to_map = |c: [f64; 3], flip: bool| {
        let w = maps(c, flip).0;
        LinearMap::from_rows(&[w[0].to_vec(), w[1].to_vec()])
    };
    // lowest-bound boxes, skipping any within one initial spacing of a box already taken
    let mut taken: Vec<([f64; 3], bool)> = Vec::new();
    let near = |a: &[f64; 3], b: &[f64; 3]| {
        let wrap = |d: f64| d.abs().min(PI - d.abs());
        wrap(a[0] - b[0]) < t && wrap(a[1] - b[1]) < t && (a[2] - b[2]).abs() < t
    };
    while taken.len() < FRONTIER {
        let Some(cell) = heap.pop() else { break };
        if !taken.iter().any(|(c, f)| *f == cell.flip && near(c, &cell.c)) {
            taken.push((cell.c, cell.flip));
        }
    }
    let frontier = taken.iter().map(|&(c, f)| to_map(c, f)).collect::<Result<Vec<_>>>()?;
    Ok(CertifiedLower {
        lower,
        best_center,
        center_witness: to_map(best_at.0, best_at.1)?,
        frontier,
        upper_used: upper,
        u_max,
        initial_cells: initial,
        evaluations,
        method: format!("lipschitz net: resolution {t}, {initial} initial boxes, {evaluations} evaluations, u_max {u_max:.6}"),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_are_inverse_and_unimodular() {
        for flip in [false, true] {
            let (t, inv) = maps([0.3, 1.2, 0.4], flip);
            let p = mul(&t, &inv);
            assert!((p[0][0] - 1.0).abs() < 1e-14 && p[0][1].abs() < 1e-14);
            assert!(p[1][0].abs() < 1e-14 && (p[1][1] - 1.0).abs() < 1e-14);
            let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
            assert!((det.abs() - 1.0).abs() < 1e-14);
            assert_eq!(det < 0.0, flip);
        }
    }

    #[test]
    fn same_body_gives_one() {
        let b = VPolytope::cross_polytope(2);
        let r = bm_lower_certified(&b, &b, &CertifyOptions { upper_hint: Some(1.0), ..Default::default() }, RngSeed::new(0))
            .unwrap();
        assert_eq!(r.lower, 1.0);
    }

    #[test]
    fn coarse_net_degrades_to_one() {
        let x = VPolytope::cross_polytope(2);
        let y = VPolytope::regular_polygon(64).unwrap();
        let opts = CertifyOptions { net_resolution: 10.0, refine_budget: 0, upper_hint: Some(1.5) };
        let r = bm_lower_certified(&x, &y, &opts, RngSeed::new(0)).unwrap();
        assert_eq!(r.lower, 1.0);
        assert!(r.warning.is_some());
    }

    #[test]
    fn cross_polytope_against_disc_like_polygon() {
        let x = VPolytope::cross_polytope(2);
        let y = VPolytope::regular_polygon(64).unwrap();
        let r = bm_lower_certified(&x, &y, &CertifyOptions::default(), RngSeed::new(5)).unwrap();
        assert!(r.lower >= 1.2 && r.lower <= 2f64.sqrt() + 1e-9, "{r:?}");
    }

    #[test]
    fn rejects_higher_dimensions() {
        let b = VPolytope::cross_polytope(3);
        assert!(matches!(
            bm_lower_certified(&b, &b, &CertifyOptions::default(), RngSeed::new(0)),
            Err(GlabError::UnsupportedDimension(3, _))
        ));
    }
}
