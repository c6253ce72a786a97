//! Monte Carlo volumes next to exact planar and spatial values, and the volume radius profile.
use glab::estimators::{profile_spread, volume_exact_lowdim, volume_mc, volume_radius_profile, Body};
use glab::operators::operator_ball_volume_check;
use glab::{DistributionSpec, RngSeed, VPolytope};

fn main() -> glab::Result<()> {
    let seed = RngSeed::new(11);
    let octahedron = VPolytope::cross_polytope(3);
    let mc = volume_mc(Body::V(&octahedron), 1.0, 200_000, seed)?;
    println!("vol(B_1^3): MC {:.4} [{:.4}, {:.4}], exact {:.4}", mc.value, mc.ci_low, mc.ci_high, volume_exact_lowdim(&octahedron)?);

    let vb = operator_ball_volume_check(&VPolytope::cross_polytope(2), 200_000, seed.derive(1))?;
    println!("vol_4(V_B) for the diamond: {:.3}, expected {:?}", vb.estimate.value, vb.expected);

    let rows = volume_radius_profile(&DistributionSpec::gaussian(3), &[8, 32, 128, 512], 50_000, seed.derive(2))?;
    for r in &rows {
        println!("m = {:>4}: vol {:.4}, normalized {:.4}", r.m, r.volume.value, r.normalized.value);
    }
    println!("spread {:.3}", profile_spread(&rows));
    Ok(())
}
