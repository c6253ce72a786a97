//! `(k, β)`-mixing checks on given subspaces, and the explicit witnesses for projections.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::LinearMap;
use crate::error::{invalid, Result};
use crate::linalg::{jacobi_svd, orthonormal_columns};

/// A subspace of `R^n` given by orthonormal basis rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    pub n: usize,
    /// `k x n`, orthonormal rows.
    pub basis: DMatrix<f64>,
}

impl Subspace {
    /// Orthonormalises the span of `rows` (each of length `n`).
    pub fn span(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|r| r.len() != n) {
            return invalid("subspace needs at least one row of length n");
        }
        let a = DMatrix::from_fn(n, rows.len(), |i, j| rows[j][i]);
        let basis = orthonormal_columns(&a, 1e-10);
        if basis.nrows() == 0 {
            return invalid("spanning rows are all zero");
        }
        Ok(Subspace { n, basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthonormal basis rows of the orthogonal complement.
    pub fn complement(&self) -> DMatrix<f64> {
        let k = self.dim();
        let proj = DMatrix::<f64>::identity(self.n, self.n) - self.basis.transpose() * &self.basis;
        let eig = SymmetricEigen::new(proj);
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        DMatrix::from_fn(self.n - k, self.n, |r, c| eig.eigenvectors[(c, idx[r])])
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        let g = &self.basis * self.basis.transpose() - DMatrix::<f64>::identity(self.dim(), self.dim());
        g.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }
}

impl Serialize for Subspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.basis.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub beta_target: f64,
    pub achieved_margin: f64,
    pub witness: Subspace,
    pub pass: bool,
}

/// Matrix of `P_{E⊥} T` restricted to `E`, in the bases of `E` and `E⊥`.
fn restricted(t: &DMatrix<f64>, e: &Subspace) -> DMatrix<f64> {
    e.complement() * t * e.basis.transpose()
}

/// Smallest singular value of `P_{E⊥} T|_E`; zero when `dim E⊥ < dim E`.
pub(crate) fn margin(t: &DMatrix<f64>, e: &Subspace) -> f64 {
    let k = e.dim();
    if e.n - k < k {
        return 0.0;
    }
    let m = restricted(t, e);
    jacobi_svd(&m).s.last().copied().unwrap_or(0.0)
}

pub fn mixing_check(t: &LinearMap, e: &Subspace, beta: f64) -> Result<MixingReport> {
    if e.n != t.n {
        return invalid("subspace and map dimensions differ");
    }
    let achieved = margin(&t.matrix, e);
    Ok(MixingReport { beta_target: beta, achieved_margin: achieved, witness: e.clone(), pass: achieved >= beta })
}

/// Rank and orthonormal range/kernel bases of an orthogonal projection.
fn projection_split(p: &LinearMap) -> Result<(usize, DMatrix<f64>, DMatrix<f64>)> {
    let m = &p.matrix;
    let n = p.n;
    let sym = (m - m.transpose()).iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let idem = (m * m - m).iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if sym > 1e-8 || idem > 1e-8 {
        return invalid(format!(
            "not an orthogonal projection (asymmetry {sym:.2e}, idempotency defect {idem:.2e})"
        ));
    }
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let s = idx.iter().filter(|&&i| eig.eigenvalues[i] > 0.5).count();
    let range = DMatrix::from_fn(s, n, |r, c| eig.eigenvectors[(c, idx[r])]);
    let kernel = DMatrix::from_fn(n - s, n, |r, c| eig.eigenvectors[(c, idx[s + r])]);
    Ok((s, range, kernel))
}

/// `W = span{(u_i + w_i)/√2}` for `u_i` spanning the range and `w_i` orthonormal in the kernel;
/// `P` is `(s, 1/2)`-mixing on `W`.
pub fn projection_mixing_witness(p: &LinearMap) -> Result<Subspace> {
    let (s, range, kernel) = projection_split(p)?;
    if s == 0 || 2 * s > p.n {
        return invalid(format!("projection rank {s} must lie in [1, n/2] for n = {}", p.n));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let basis = DMatrix::from_fn(s, p.n, |r, c| h * (range[(r, c)] + kernel[(r, c)]));
    Ok(Subspace { n: p.n, basis })
}

/// The witness for `2P`: built from `P` when `rank P <= n/2`, otherwise from `I - P`.
pub fn two_p_mixing_test(p: &LinearMap) -> Result<MixingReport> {
    let (s, _, _) = projection_split(p)?;
    let n = p.n;
    if s == 0 || s == n {
        return invalid(format!("min(s, n - s) = 0 for rank {s}; no mixing subspace exists"));
    }
    let w = if 2 * s <= n {
        projection_mixing_witness(p)?
    } else {
        let q = LinearMap::new(DMatrix::identity(n, n) - &p.matrix)?;
        projection_mixing_witness(&q)?
    };
    let two_p = LinearMap::new(&p.matrix * 2.0)?;
    mixing_check(&two_p, &w, 1.0 - 1e-8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftInvarianceReport {
    pub base_margin: f64,
    pub lambdas: Vec<f64>,
    pub margins: Vec<f64>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Margins of `T + λI` on `E` for each `λ`; they equal the margin of `T` since `P_{E⊥}(λx) = 0`.
pub fn mixing_shift_invariance_test(t: &LinearMap, e: &Subspace, lambdas: &[f64]) -> Result<ShiftInvarianceReport> {
    let base = mixing_check(t, e, 0.0)?.achieved_margin;
    let mut margins = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let shifted = &t.matrix + DMatrix::<f64>::identity(t.n, t.n) * l;
        margins.push(margin(&shifted, e));
    }
    let dev = margins.iter().fold(0.0f64, |a, m| a.max((m - base).abs()));
    Ok(ShiftInvarianceReport { base_margin: base, lambdas: lambdas.to_vec(), margins, max_deviation: dev, pass: dev <= 1e-10 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn map(rows: &[[f64; 2]]) -> LinearMap {
        LinearMap::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_never_mixes() {
        let e = Subspace::span(3, &[vec![1.0, 2.0, 0.0]]).unwrap();
        let r = mixing_check(&LinearMap::identity(3), &e, 0.1).unwrap();
        assert_abs_diff_eq!(r.achieved_margin, 0.0, epsilon = 1e-14);
        assert!(!r.pass);
    }

    #[test]
    fn projection_on_diagonal_line() {
        let p = map(&[[1.0, 0.0], [0.0, 0.0]]);
        let e = Subspace::span(2, &[vec![1.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(mixing_check(&p, &e, 0.5).unwrap().achieved_margin, 0.5, epsilon = 1e-14);
        let w = projection_mixing_witness(&p).unwrap();
        assert_abs_diff_eq!(w.basis[(0, 0)].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(w.basis[(0, 1)].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn swap_mixes_fully() {
        let t = map(&[[0.0, 1.0], [1.0, 0.0]]);
        let e = Subspace::span(2, &[vec![1.0, 0.0]]).unwrap();
        let r = mixing_check(&t, &e, 1.0).unwrap();
        assert!(r.pass);
        let s = mixing_shift_invariance_test(&t, &e, &[7.0]).unwrap();
        assert_abs_diff_eq!(s.margins[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn two_p_branches() {
        let p = map(&[[1.0, 0.0], [0.0, 0.0]]);
        assert_abs_diff_eq!(two_p_mixing_test(&p).unwrap().achieved_margin, 1.0, epsilon = 1e-12);
        let mut d = DMatrix::<f64>::identity(4, 4);
        d[(3, 3)] = 0.0;
        let r = two_p_mixing_test(&LinearMap::new(d).unwrap()).unwrap();
        assert_abs_diff_eq!(r.achieved_margin, 1.0, epsilon = 1e-12);
        assert!(two_p_mixing_test(&LinearMap::identity(3)).is_err());
    }

    #[test]
    fn oblique_projection_rejected() {
        let p = map(&[[1.0, 1.0], [0.0, 0.0]]);
        assert!(projection_mixing_witness(&p).is_err());
    }
}
