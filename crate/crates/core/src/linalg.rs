//! Small dense helpers: vector arithmetic, one-sided Jacobi SVD, orthonormal bases.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// `m * x` for a square or rectangular nalgebra matrix and a slice.
pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (i, o) in out.iter_mut().enumerate() {
                *o += m[(i, j)] * xj;
            }
        }
    }
    out
}

/// Uniform direction on the unit sphere of dimension `n`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm2(&v);
        if r > 1e-300 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

pub fn random_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Thin singular value decomposition `a = u * diag(s) * v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// rows(a) x k, orthonormal columns, k = min(rows, cols)
    pub u: DMatrix<f64>,
    /// descending, nonnegative, length k
    pub s: Vec<f64>,
    /// cols(a) x k, orthonormal columns
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.s.len();
        let mut us = self.u.clone();
        for j in 0..k {
            for i in 0..us.nrows() {
                us[(i, j)] *= self.s[j];
            }
        }
        us * self.v.transpose()
    }
}

/// One-sided (Hestenes) Jacobi SVD, iterated until every column pair is orthogonal to 1e-12.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-12 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (u.column(j).norm(), j)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let scale = order.first().map_or(0.0, |o| o.0);
    let mut uu = DMatrix::<f64>::zeros(m, n);
    let mut vv = DMatrix::<f64>::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut filled = Vec::new();
    for (k, &(sigma, j)) in order.iter().enumerate() {
        vv.set_column(k, &v.column(j));
        if sigma > 1e-300 && sigma > 1e-15 * scale {
            uu.set_column(k, &(u.column(j) / sigma));
            filled.push(k);
        }
        s.push(sigma);
    }
    // complete left vectors belonging to (numerically) zero singular values
    for k in 0..n {
        if filled.contains(&k) {
            continue;
        }
        for e in 0..m {
            let mut cand = nalgebra::DVector::<f64>::zeros(m);
            cand[e] = 1.0;
            for &f in &filled {
                let proj = uu.column(f).dot(&cand);
                cand -= uu.column(f) * proj;
            }
            let r = cand.norm();
            if r > 1e-6 {
                uu.set_column(k, &(cand / r));
                filled.push(k);
                break;
            }
        }
    }
    Svd { u: uu, s, v: vv }
}

/// Numerical rank: singular values above `tol` times the largest one.
pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let svd = jacobi_svd(a);
    let top = svd.s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    svd.s.iter().filter(|&&s| s > tol * top.max(1.0)).count()
}

/// Orthonormal basis (as rows) of the column space of `a`, dropping directions below `tol`.
pub fn orthonormal_columns(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let svd = jacobi_svd(a);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..svd.s.len()).filter(|&k| svd.s[k] > tol * top.max(1.0)).collect();
    DMatrix::from_fn(keep.len(), a.nrows(), |r, c| svd.u[(c, keep[r])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn svd_diag_and_rotation() {
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert_eq!(jacobi_svd(&d).s, vec![3.0, 1.0]);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        for sv in jacobi_svd(&r).s {
            assert!((sv - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_reconstructs_rectangular_and_rank_deficient() {
        let mut rng = RngSeed::new(11).rng();
        for &(m, n) in &[(5, 3), (3, 5), (6, 6)] {
            let a = random_gaussian_matrix(&mut rng, m, n);
            let svd = jacobi_svd(&a);
            assert!((svd.reconstruct() - &a).norm() < 1e-12 * a.norm());
            let utu = svd.u.transpose() * &svd.u;
            assert!((utu - DMatrix::identity(svd.s.len(), svd.s.len())).norm() < 1e-12);
        }
        let ones = DMatrix::from_element(3, 3, 1.0);
        let svd = jacobi_svd(&ones);
        assert!((svd.s[0] - 3.0).abs() < 1e-12 && svd.s[1].abs() < 1e-12);
        assert_eq!(rank(&ones, 1e-10), 1);
        let utu = svd.u.transpose() * &svd.u;
        assert!((utu - DMatrix::identity(3, 3)).norm() < 1e-10);
    }
}
