//! Banach–Mazur distance: search upper bounds, certified planar lower bounds, random-pair
//! experiments and projection/mixing scans.

mod certify;
mod gluskin;
mod scans;
mod search;

use serde::{Deserialize, Serialize};

pub use certify::{bm_lower_certified, CertifiedLower, CertifyOptions};
pub use gluskin::{gluskin_pair_experiment, GluskinConfig, GluskinReport, GluskinRow, PolytopeModel};
pub use scans::{
    mixing_family, mixing_norm_scan, projection_norm_scan, sk_criterion_scan, BasisConstantReport, MixingMember,
    MixingScanReport, OperatorSamples, ProjectionFamily, SkConfig, SkReport,
};
pub use search::bm_upper_search;

use crate::operators::LinearMap;

/// Two-sided estimate of `d_BM(X, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmEstimate {
    pub upper: f64,
    /// `|det| = 1` map attaining `upper`.
    pub upper_witness: LinearMap,
    /// Defaults to the trivial bound 1.
    pub lower: f64,
    pub lower_method: String,
}

impl BmEstimate {
    /// Replaces the lower bound by a certified one.
    pub fn with_lower(mut self, lower: &CertifiedLower) -> Self {
        self.lower = lower.lower;
        self.lower_method = lower.method.clone();
        self
    }

    pub fn coupled(&self) -> bool {
        self.lower <= self.upper + 1e-6
    }
}
