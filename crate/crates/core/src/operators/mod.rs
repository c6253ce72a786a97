//! Linear maps between polytope-normed spaces.

mod mixing;
mod nets;
mod volume;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use mixing::{
    mixing_check, mixing_shift_invariance_test, projection_mixing_witness, two_p_mixing_test, MixingReport,
    ShiftInvarianceReport, Subspace,
};
pub use nets::{entropy_bound, entropy_bound_mb, greedy_net, NetReport, OperatorBallKind, OperatorBallSpec, DEFAULT_C0};
pub(crate) use mixing::margin as margin_of;
pub use volume::{operator_ball_volume_check, vop_volume_check, OperatorVolumeReport};

use crate::error::{invalid, GlabError, Result};
use crate::linalg::{jacobi_svd, mat_vec, Svd};
use crate::polytope::{minkowski_norm, GaugeOracle, VPolytope};

/// A square matrix with its singular value decomposition and determinant computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub n: usize,
    pub matrix: DMatrix<f64>,
    svd: Svd,
    det: f64,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return invalid(format!("linear map must be square, got {}x{}", matrix.nrows(), matrix.ncols()));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return invalid("linear map has non-finite entries");
        }
        let svd = jacobi_svd(&matrix);
        let det = matrix.clone().lu().determinant();
        Ok(LinearMap { n: matrix.nrows(), matrix, svd, det })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("matrix rows must form a square");
        }
        Self::new(DMatrix::from_row_slice(n, n, &rows.concat()))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is valid")
    }

    /// Descending singular values `s_1 >= ... >= s_n`.
    pub fn singular_values(&self) -> &[f64] {
        &self.svd.s
    }

    /// `s_k(T)`, 1-based.
    pub fn s(&self, k: usize) -> f64 {
        self.svd.s[k - 1]
    }

    pub fn left_frame(&self) -> &DMatrix<f64> {
        &self.svd.u
    }

    pub fn right_frame(&self) -> &DMatrix<f64> {
        &self.svd.v
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Euclidean operator norm `s_1`.
    pub fn op_norm(&self) -> f64 {
        self.svd.s[0]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrix, x)
    }

    pub fn inverse(&self) -> Result<LinearMap> {
        if self.det.abs() <= 1e-300 {
            return Err(GlabError::SingularMap(self.det.abs()));
        }
        let inv = self.matrix.clone().try_inverse().ok_or(GlabError::SingularMap(self.det.abs()))?;
        LinearMap::new(inv)
    }

    pub fn compose(&self, other: &LinearMap) -> Result<LinearMap> {
        LinearMap::new(&self.matrix * &other.matrix)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.matrix.row(i).iter().copied().collect()).collect()
    }
}

impl Serialize for LinearMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        LinearMap::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Singular values with left and right frames of `t`.
pub fn svd(t: &LinearMap) -> &Svd {
    &t.svd
}

/// `|det S|^{-1/n} S`.
pub fn det_normalize(s: &LinearMap) -> Result<LinearMap> {
    let d = s.det.abs();
    if !(d > 1e-12) {
        return Err(GlabError::SingularMap(d));
    }
    LinearMap::new(&s.matrix * d.powf(-1.0 / s.n as f64))
}

/// Exact `‖T : X_A → X_B‖ = max_j ‖T a_j‖_B` over the generators of `A`.
pub fn op_norm_polytopes(t: &LinearMap, a: &VPolytope, b: &VPolytope) -> Result<f64> {
    if t.n != a.n || t.n != b.n {
        return invalid("map and polytope dimensions differ");
    }
    if !b.full_dimensional {
        return op_norm_polytopes_lp(t, a, b);
    }
    let mut oracle = GaugeOracle::new(b)?;
    op_norm_with(&t.matrix, a, &mut oracle)
}

/// `max_j ‖T a_j‖_B` with a prepared gauge; candidates that cannot beat the running maximum are
/// discarded by a feasible-cost certificate without being solved to optimality.
pub fn op_norm_with(t: &DMatrix<f64>, a: &VPolytope, oracle: &mut GaugeOracle) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for g in a.generator_rows() {
        let z = mat_vec(t, g);
        if let Some(v) = oracle.norm_above(&z, best)? {
            best = v;
        }
    }
    Ok(best.max(0.0))
}

/// Same value as [`op_norm_polytopes`], each generator image solved by the dense LP.
pub fn op_norm_polytopes_lp(t: &LinearMap, a: &VPolytope, b: &VPolytope) -> Result<f64> {
    let mut best = 0.0f64;
    for g in a.generator_rows() {
        best = best.max(minkowski_norm(b, &t.apply(g))?);
    }
    Ok(best)
}

/// `‖T : X → Y‖ · ‖T⁻¹ : Y → X‖`.
pub fn distortion(t: &LinearMap, x: &VPolytope, y: &VPolytope) -> Result<f64> {
    Ok(op_norm_polytopes(t, x, y)? * op_norm_polytopes(&t.inverse()?, y, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn svd_examples() {
        let d = LinearMap::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(d.singular_values(), &[3.0, 1.0]);
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let r = LinearMap::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        assert_abs_diff_eq!(r.s(1), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.s(2), 1.0, epsilon = 1e-14);
        assert!(LinearMap::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn det_normalize_examples() {
        let a = det_normalize(&LinearMap::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap()).unwrap();
        assert_abs_diff_eq!((a.matrix - DMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-15);
        let b = det_normalize(&LinearMap::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
        assert_abs_diff_eq!(b.matrix[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.matrix[(1, 1)], 0.5, epsilon = 1e-15);
        let z = LinearMap::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(det_normalize(&z), Err(GlabError::SingularMap(_))));
    }

    #[test]
    fn op_norm_examples() {
        let b1 = VPolytope::cross_polytope(2);
        let two = LinearMap::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_abs_diff_eq!(op_norm_polytopes(&two, &b1, &b1).unwrap(), 2.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rot = LinearMap::from_rows(&[vec![h, -h], vec![h, h]]).unwrap();
        assert_abs_diff_eq!(op_norm_polytopes(&rot, &b1, &b1).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(op_norm_polytopes_lp(&rot, &b1, &b1).unwrap(), 2f64.sqrt(), epsilon = 1e-9);
    }
}
