//! Fast exact gauge of an absolute convex hull.
//!
//! `‖z‖ = min ‖λ‖₁ s.t. Gλ = z` is solved by a revised simplex specialised to this LP: every
//! nonsingular choice of `n` generators, with signs matching the coefficients, is a feasible
//! basis, so no phase one is needed and the previous optimal basis is a warm start for the next
//! query. In dimensions up to 3 the facet list is used instead.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::facets::{enumerate_facets, MAX_FACET_GENERATORS};
use super::VPolytope;
use crate::error::{GlabError, Result};
use crate::linalg::dot;

const PRICE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Mode {
    Facets(Arc<Vec<f64>>),
    Simplex { basis: Vec<usize>, start: Arc<Vec<usize>> },
}

/// Exact norm oracle for one full-dimensional `VPolytope`. Cheap to clone.
#[derive(Debug, Clone)]
pub struct GaugeOracle<'a> {
    n: usize,
    gens: &'a [f64],
    mode: Mode,
}

impl<'a> GaugeOracle<'a> {
    /// Facet gauge when `n <= 3`, simplex gauge otherwise.
    pub fn new(poly: &'a VPolytope) -> Result<Self> {
        if poly.n <= 2 || (poly.n == 3 && poly.num_generators() <= MAX_FACET_GENERATORS) {
            let f = enumerate_facets(poly.n, &poly.generators)?;
            return Ok(GaugeOracle { n: poly.n, gens: &poly.generators, mode: Mode::Facets(Arc::new(f.normals)) });
        }
        Self::simplex(poly)
    }

    /// Always uses the simplex gauge.
    pub fn simplex(poly: &'a VPolytope) -> Result<Self> {
        if !poly.full_dimensional {
            return Err(GlabError::UnboundedPolar);
        }
        let start = initial_basis(poly.n, &poly.generators).ok_or(GlabError::UnboundedPolar)?;
        Ok(GaugeOracle {
            n: poly.n,
            gens: &poly.generators,
            mode: Mode::Simplex { basis: start.clone(), start: Arc::new(start) },
        })
    }

    pub fn norm(&mut self, z: &[f64]) -> Result<f64> {
        Ok(self.norm_above(z, f64::NEG_INFINITY)?.expect("threshold -inf always resolves"))
    }

    /// `Some(‖z‖)` if `‖z‖ > threshold`, otherwise `None`.
    ///
    /// A `None` is certified: some feasible representation of `z` already has `ℓ₁` cost at most
    /// `threshold`.
    pub fn norm_above(&mut self, z: &[f64], threshold: f64) -> Result<Option<f64>> {
        if z.len() != self.n {
            return Err(GlabError::InvalidInput(format!("point has length {}, expected {}", z.len(), self.n)));
        }
        if z.iter().all(|&x| x == 0.0) {
            return Ok(if threshold < 0.0 { Some(0.0) } else { None });
        }
        let n = self.n;
        match &mut self.mode {
            Mode::Facets(normals) => {
                let v = normals.chunks_exact(n).fold(0.0f64, |a, u| a.max(dot(u, z).abs()));
                Ok((v > threshold).then_some(v))
            }
            Mode::Simplex { basis, start } => {
                match revised_simplex(n, self.gens, basis, z, threshold) {
                    Ok(v) => Ok(v),
                    Err(_) => {
                        basis.clone_from(start);
                        revised_simplex(n, self.gens, basis, z, threshold)
                    }
                }
            }
        }
    }
}

/// Pivoted Gram-Schmidt selection of `n` well-spread generators.
fn initial_basis(n: usize, gens: &[f64]) -> Option<Vec<usize>> {
    let k = gens.len() / n;
    let mut resid: Vec<Vec<f64>> = gens.chunks_exact(n).map(|g| g.to_vec()).collect();
    let scale = resid.iter().map(|r| dot(r, r)).fold(0.0f64, f64::max).sqrt();
    let mut chosen = Vec::with_capacity(n);
    for _ in 0..n {
        let (best, len) = (0..k)
            .filter(|j| !chosen.contains(j))
            .map(|j| (j, dot(&resid[j], &resid[j]).sqrt()))
            .fold((usize::MAX, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best == usize::MAX || len <= 1e-10 * scale {
            return None;
        }
        chosen.push(best);
        let q: Vec<f64> = resid[best].iter().map(|x| x / len).collect();
        for r in resid.iter_mut() {
            let c = dot(r, &q);
            r.iter_mut().zip(&q).for_each(|(a, b)| *a -= c * b);
        }
    }
    Some(chosen)
}

fn basis_matrix(n: usize, gens: &[f64], basis: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, c| gens[basis[c] * n + i])
}

fn revised_simplex(
    n: usize,
    gens: &[f64],
    basis: &mut [usize],
    z: &[f64],
    threshold: f64,
) -> Result<Option<f64>> {
    let k = gens.len() / n;
    let zv = DVector::from_column_slice(z);
    let max_iter = 50 * (k + n) + 100;
    let mut best_obj = f64::INFINITY;
    let mut stalled = 0usize;
    // Sign of each basic coefficient, i.e. which half of the split variable `λ = λ⁺ - λ⁻` is
    // basic. Kept across pivots so that degenerate zeros do not change identity.
    let mut signs: Option<Vec<f64>> = None;
    for _ in 0..max_iter {
        let m = basis_matrix(n, gens, basis);
        let lu = m.clone().lu();
        let mu = lu.solve(&zv).ok_or_else(|| GlabError::NumericalFailure("singular gauge basis".into()))?;
        let obj: f64 = mu.iter().map(|x| x.abs()).sum();
        if !obj.is_finite() {
            return Err(GlabError::NumericalFailure("non-finite gauge iterate".into()));
        }
        if obj <= threshold {
            return Ok(None);
        }
        if obj < best_obj * (1.0 - 1e-14) {
            best_obj = obj;
            stalled = 0;
        } else {
            stalled += 1;
        }
        let scale = mu.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let sg = signs.get_or_insert_with(|| mu.iter().map(|&x| if x < 0.0 { -1.0 } else { 1.0 }).collect());
        for (s, &x) in sg.iter_mut().zip(mu.iter()) {
            if *s * x < -1e-9 * scale {
                *s = -*s;
            }
        }
        let sigma = DVector::from_column_slice(sg);
        let pi = m
            .transpose()
            .lu()
            .solve(&sigma)
            .ok_or_else(|| GlabError::NumericalFailure("singular gauge dual".into()))?;
        let pi = pi.as_slice();
        // pricing: Dantzig, Bland once progress stalls
        let bland = stalled > n + 5;
        let mut enter = None;
        let mut enter_val = 1.0 + PRICE_TOL;
        for j in 0..k {
            let v = dot(pi, &gens[j * n..(j + 1) * n]).abs();
            if v > enter_val {
                enter = Some(j);
                if bland {
                    break;
                }
                enter_val = v;
            }
        }
        let Some(j) = enter else {
            return Ok(Some(obj));
        };
        let s = if dot(pi, &gens[j * n..(j + 1) * n]) < 0.0 { -1.0 } else { 1.0 };
        let col = DVector::from_iterator(n, gens[j * n..(j + 1) * n].iter().map(|x| s * x));
        let d_raw = lu.solve(&col).ok_or_else(|| GlabError::NumericalFailure("singular gauge basis".into()))?;
        let dmax = d_raw.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut leave = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..n {
            let d = sigma[i] * d_raw[i];
            if d > 1e-11 * dmax {
                let r = (sigma[i] * mu[i]).max(0.0) / d;
                let better = match leave {
                    None => true,
                    Some(l) => r < best_ratio || (r == best_ratio && basis[i] < basis[l]),
                };
                if better {
                    best_ratio = r;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Err(GlabError::NumericalFailure("gauge ratio test found no pivot".into()));
        };
        basis[r] = j;
        if let Some(sg) = signs.as_mut() {
            sg[r] = s;
        }
    }
    Err(GlabError::NumericalFailure("gauge simplex iteration cap reached".into()))
}
