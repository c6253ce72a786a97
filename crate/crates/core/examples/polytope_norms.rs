//! Gauge and support values of a random polytope, checked against each other through duality.
use glab::bm::PolytopeModel;
use glab::polytope::{minkowski_norm, polar, support_function};
use glab::{DistributionSpec, RngSeed};

fn main() -> glab::Result<()> {
    let spec = DistributionSpec::gaussian(3);
    let b = PolytopeModel::Pure.build(&spec, 20, RngSeed::new(7))?;
    println!("B_m: {} generators in R^{}, circumradius {:.4}", b.num_generators(), b.n, b.circumradius());

    let h = polar(&b)?;
    for z in [[1.0, 0.0, 0.0], [0.3, -1.2, 0.5], [2.0, 2.0, 2.0]] {
        let norm = minkowski_norm(&b, &z)?;
        // the polar gauge is the support function of B
        println!("z = {z:?}: ‖z‖_B = {norm:.6}, h_B(z) = {:.6}, ‖z‖_B° = {:.6}", support_function(&b, &z), h.gauge(&z));
    }
    Ok(())
}
