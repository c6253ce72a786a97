//! Upper and certified lower bounds for the Banach-Mazur distance between planar bodies.
use glab::bm::{bm_lower_certified, bm_upper_search, CertifyOptions, PolytopeModel};
use glab::{DistributionSpec, RngSeed, VPolytope};

fn report(name: &str, x: &VPolytope, y: &VPolytope, seed: RngSeed) -> glab::Result<()> {
    let up = bm_upper_search(x, y, 6, 400, seed)?;
    let opts = CertifyOptions { upper_hint: Some(up.upper), ..CertifyOptions::default() };
    let low = bm_lower_certified(x, y, &opts, seed.derive(1))?;
    println!("{name}: {:.5} <= d_BM <= {:.5}  ({} evaluations)", low.lower, up.upper, low.evaluations);
    Ok(())
}

fn main() -> glab::Result<()> {
    let seed = RngSeed::new(3);
    report("cross vs square", &VPolytope::cross_polytope(2), &VPolytope::cube(2), seed)?;
    report("square vs hexagon", &VPolytope::cube(2), &VPolytope::regular_polygon(6)?, seed)?;

    let spec = DistributionSpec::gaussian(2);
    let x = PolytopeModel::BasisEnriched.build(&spec, 4, seed.derive(10))?;
    let y = PolytopeModel::BasisEnriched.build(&spec, 4, seed.derive(11))?;
    report("random pair, m = 4", &x, &y, seed.derive(12))
}
