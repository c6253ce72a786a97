//! Greedy t-nets of the normalised operator ball against the entropy bound.
use glab::operators::{entropy_bound_mb, greedy_net, OperatorBallKind, OperatorBallSpec, DEFAULT_C0};
use glab::{RngSeed, VPolytope};

fn main() -> glab::Result<()> {
    let b = VPolytope::cross_polytope(2);
    let spec = OperatorBallSpec { kind: OperatorBallKind::MB(b.clone()), n: 2 };
    for t in [1.0, 0.5, 0.25] {
        let net = greedy_net(&spec, t, 5_000, 1_000, RngSeed::new(9))?;
        println!(
            "t = {t}: {} points (bound {:.1}), held-out covered {}/{}",
            net.net.len(),
            entropy_bound_mb(&b, t, DEFAULT_C0)?,
            net.heldout_covered,
            net.heldout
        );
    }
    Ok(())
}
