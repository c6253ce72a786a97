//! Draws from each builtin isotropic family and reports how close the sample is to isotropic.
use glab::sampling::{isotropy_report, sample, Family};
use glab::{DistributionSpec, RngSeed};

fn main() -> glab::Result<()> {
    let seed = RngSeed::new(2024);
    for name in ["gaussian", "cube_uniform", "product_exponential", "ball_uniform"] {
        let spec = DistributionSpec::new(Family::builtin(name).expect("builtin"), 6);
        let s = sample(&spec, 20_000, seed)?;
        let r = isotropy_report(&s, &spec)?;
        println!(
            "{name:>20}: |mean| = {:.4}  ‖Cov - I‖ = {:.4}  L = {:.4}",
            r.empirical_mean_norm, r.covariance_operator_distance, r.isotropic_constant_estimate
        );
    }
    Ok(())
}
