//! Volume, width, concentration and summing-norm estimators.

mod concentration;
mod smallprob;
mod unconditional;
mod volume;

pub use concentration::{concentration_constants, pi1_bounds, ConcentrationReport, Pi1Bounds};
pub use smallprob::{fixed_operator_smallprob_check, gluskin_gamma};
pub use unconditional::{unconditional_distance_certificate, CertificateReport};
pub use volume::{
    bf_bound_check, body_volume, mean_width, polar_bounding_radius, polar_volume, polar_volume_check,
    profile_spread, volume_exact_lowdim, volume_mc, volume_radius_profile, BfReport, Body, PolarVolumeReport,
    ProfileRow,
};
