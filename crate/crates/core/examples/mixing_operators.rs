//! Mixing witnesses for projections and for the difference of complementary projections.
use glab::linalg::{orthonormal_columns, random_gaussian_matrix};
use glab::operators::{mixing_shift_invariance_test, projection_mixing_witness, two_p_mixing_test};
use glab::{LinearMap, RngSeed};

fn main() -> glab::Result<()> {
    let (n, k) = (8, 3);
    let mut rng = RngSeed::new(5).rng();
    let q = orthonormal_columns(&random_gaussian_matrix(&mut rng, n, k), 1e-12);
    let p = LinearMap::new(q.transpose() * &q)?;

    let e = projection_mixing_witness(&p)?;
    let shifted = mixing_shift_invariance_test(&p, &e, &[-3.0, 0.0, 1.0, 10.0])?;
    println!(
        "projection of rank {k}: witness of dim {}, margin {:.12}, max deviation under shifts {:.1e}",
        e.dim(),
        shifted.base_margin,
        shifted.max_deviation
    );

    let r = two_p_mixing_test(&p)?;
    println!("2P: margin {:.12} (target {}), pass {}", r.achieved_margin, r.beta_target, r.pass);
    Ok(())
}
