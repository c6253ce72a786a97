//! Exact operator norms between polytope norms, with the sampled lower bound alongside.
use glab::operators::{distortion, op_norm_polytopes};
use glab::oracles::opnorm_sphere_oracle;
use glab::{LinearMap, RngSeed, VPolytope};

fn main() -> glab::Result<()> {
    let cross = VPolytope::cross_polytope(2);
    let square = VPolytope::cube(2);
    let hexagon = VPolytope::regular_polygon(6)?;
    let t = LinearMap::from_rows(&[vec![1.0, 0.5], vec![-0.25, 2.0]])?;

    for (name, a, b) in [("l1 -> linf", &cross, &square), ("linf -> l1", &square, &cross), ("hex -> hex", &hexagon, &hexagon)] {
        let exact = op_norm_polytopes(&t, a, b)?;
        let oracle = opnorm_sphere_oracle(&t, a, b, 20_000, RngSeed::new(1))?;
        println!("{name}: exact {exact:.6}, sampled lower {:.6}", oracle.value);
    }

    // a rotation by 45 degrees scaled by 1/√2 carries the square onto the diamond
    let s = LinearMap::from_rows(&[vec![0.5, -0.5], vec![0.5, 0.5]])?;
    println!("‖S‖·‖S⁻¹‖ between l1 and linf: {:.6}", distortion(&s, &cross, &square)?);
    Ok(())
}
