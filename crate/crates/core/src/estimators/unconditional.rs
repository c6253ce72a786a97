use serde::{Deserialize, Serialize};

use super::concentration::pi1_bounds;
use super::volume::polar_volume;
use crate::error::{GlabError, Result};
use crate::polytope::build_pure;
use crate::rng::RngSeed;
use crate::sampling::SampleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Lower bound for `d_BM(X_{B_m}, Y)` over every `Y` with a 1-unconditional basis.
    pub certificate: f64,
    pub polar_volume: f64,
    pub pi1_upper: f64,
    /// `(nⁿ / n!)^{1/n}`.
    pub parallelepiped_factor: f64,
    /// True when `π₁` was bounded through the exact minimum of the concentration function.
    pub pi1_certified: bool,
}

/// `d ≥ vol(B_m°)^{1/n} n / (2 π₁ (nⁿ/n!)^{1/n})` for the pure-model body of `samples`.
pub fn unconditional_distance_certificate(samples: &SampleSet, trials: usize, seed: RngSeed) -> Result<CertificateReport> {
    let n = samples.n;
    if n > 4 {
        return Err(GlabError::UnsupportedDimension(n, "certificate needs a polar volume, n <= 4".into()));
    }
    let b = build_pure(samples);
    let vol = polar_volume(&b, trials, seed.derive(1))?;
    let pi1 = pi1_bounds(samples, 64, 400, seed.derive(2))?;
    let nf = n as f64;
    let log_fact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
    let factor = ((nf * nf.ln() - log_fact) / nf).exp();
    let certificate = vol.powf(1.0 / nf) * nf / (2.0 * pi1.upper * factor);
    Ok(CertificateReport {
        certificate,
        polar_volume: vol,
        pi1_upper: pi1.upper,
        parallelepiped_factor: factor,
        pi1_certified: pi1.concentration.c1_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_polytope_certificate_at_most_one() {
        for n in 1..=3 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut r = vec![0.0; n];
                    r[i] = 1.0;
                    r
                })
                .collect();
            let s = SampleSet::from_rows(&rows, "basis", RngSeed::new(0)).unwrap();
            let c = unconditional_distance_certificate(&s, 1000, RngSeed::new(1)).unwrap();
            assert!(c.certificate <= 1.0 + 1e-12, "n = {n}: {}", c.certificate);
        }
    }
}
