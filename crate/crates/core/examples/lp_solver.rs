//! The dense simplex on a small LP, checked against brute-force vertex enumeration.
use glab::lp::{solve_lp, LpProblem};
use glab::oracles::lp_vertex_oracle;

fn main() -> glab::Result<()> {
    // max 3x + 2y  s.t.  x + y <= 4,  x + 3y <= 6,  x <= 3,  x, y >= 0
    let mut p = LpProblem::new(vec![-3.0, -2.0]);
    p.add_le(vec![1.0, 1.0], 4.0).add_le(vec![1.0, 3.0], 6.0).add_le(vec![1.0, 0.0], 3.0);
    let sol = solve_lp(&p)?;
    let oracle = lp_vertex_oracle(&p)?;
    println!("simplex: {:?} at {:?}, objective {}", sol.status, sol.point, sol.objective_value);
    println!("vertex enumeration: {} over {:?}", oracle.value, oracle.resolution);
    Ok(())
}
