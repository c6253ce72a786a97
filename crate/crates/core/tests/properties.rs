use glab::bm::bm_upper_search;
use glab::lp::{solve_lp, LpProblem, LpStatus};
use glab::operators::{det_normalize, distortion, op_norm_polytopes};
use glab::oracles::{lp_vertex_oracle, opnorm_sphere_oracle};
use glab::polytope::{minkowski_norm, polar, support_function};
use glab::{LinearMap, RngSeed, VPolytope};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

/// Symmetric hull of the given generators plus a small cross polytope, so it is full-dimensional.
fn body(n: usize) -> impl Strategy<Value = VPolytope> {
    prop::collection::vec(prop::collection::vec(coord(), n), 1..6).prop_map(move |mut rows| {
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 0.2;
            rows.push(e);
        }
        VPolytope::from_rows(&rows, "prop").unwrap()
    })
}

fn map(n: usize) -> impl Strategy<Value = LinearMap> {
    prop::collection::vec(coord(), n * n)
        .prop_filter_map("singular", move |v| {
            let t = LinearMap::from_rows(&v.chunks(n).map(<[f64]>::to_vec).collect::<Vec<_>>()).ok()?;
            (t.det().abs() > 0.05).then_some(t)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_homogeneous_and_subadditive(b in body(3), x in prop::collection::vec(coord(), 3), y in prop::collection::vec(coord(), 3), s in -4.0..4.0f64) {
        let nx = minkowski_norm(&b, &x).unwrap();
        let ny = minkowski_norm(&b, &y).unwrap();
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, c)| a + c).collect();
        prop_assert!((minkowski_norm(&b, &sx).unwrap() - s.abs() * nx).abs() <= 1e-8 * (1.0 + nx * s.abs()));
        prop_assert!(minkowski_norm(&b, &sum).unwrap() <= nx + ny + 1e-8 * (1.0 + nx + ny));
    }

    #[test]
    fn generators_have_norm_at_most_one(b in body(3)) {
        for g in b.generator_rows() {
            prop_assert!(minkowski_norm(&b, g).unwrap() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn norm_and_support_are_dual(b in body(2), x in prop::collection::vec(coord(), 2), y in prop::collection::vec(coord(), 2)) {
        // |<x, y>| <= ‖x‖_B h_B(y), and the polar gauge is the support function
        let dot: f64 = x.iter().zip(&y).map(|(a, c)| a * c).sum();
        let bound = minkowski_norm(&b, &x).unwrap() * support_function(&b, &y);
        prop_assert!(dot.abs() <= bound + 1e-8 * (1.0 + bound));
        let h = polar(&b).unwrap();
        prop_assert!((h.gauge(&y) - support_function(&b, &y)).abs() <= 1e-8 * (1.0 + bound));
    }

    #[test]
    fn exact_opnorm_dominates_sampled_lower(a in body(2), b in body(2), t in map(2), seed in any::<u64>()) {
        let exact = op_norm_polytopes(&t, &a, &b).unwrap();
        let lower = opnorm_sphere_oracle(&t, &a, &b, 400, RngSeed::new(seed)).unwrap().value;
        prop_assert!(lower <= exact * (1.0 + 1e-9));
    }

    #[test]
    fn opnorm_is_submultiplicative(a in body(2), b in body(2), c in body(2), s in map(2), t in map(2)) {
        let ts = t.compose(&s).unwrap();
        let lhs = op_norm_polytopes(&ts, &a, &c).unwrap();
        let rhs = op_norm_polytopes(&s, &a, &b).unwrap() * op_norm_polytopes(&t, &b, &c).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-8));
    }

    #[test]
    fn distortion_is_at_least_one_and_scale_free(a in body(2), b in body(2), t in map(2), s in 0.1..10.0f64) {
        let d = distortion(&t, &a, &b).unwrap();
        prop_assert!(d >= 1.0 - 1e-9);
        let scaled = LinearMap::new(&t.matrix * s).unwrap();
        prop_assert!((distortion(&scaled, &a, &b).unwrap() - d).abs() <= 1e-8 * d);
        let n = det_normalize(&t).unwrap();
        prop_assert!((n.det().abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simplex_agrees_with_vertex_enumeration(
        c in prop::collection::vec(-2.0..2.0f64, 3),
        rows in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 1..5),
        rhs in prop::collection::vec(0.0..4.0f64, 5),
    ) {
        let mut p = LpProblem::new(c);
        for (r, b) in rows.iter().zip(&rhs) {
            p.add_le(r.clone(), *b);
        }
        // a box keeps every instance bounded
        p.add_le(vec![1.0, 1.0, 1.0], 5.0);
        let sol = solve_lp(&p).unwrap();
        let oracle = lp_vertex_oracle(&p).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!((sol.objective_value - oracle.value).abs() <= 1e-7 * (1.0 + oracle.value.abs()));
        prop_assert!(p.max_violation(&sol.point) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bm_upper_is_symmetric_and_at_least_one(a in body(2), b in body(2), seed in any::<u64>()) {
        let ab = bm_upper_search(&a, &b, 4, 200, RngSeed::new(seed)).unwrap();
        let ba = bm_upper_search(&b, &a, 4, 200, RngSeed::new(seed)).unwrap();
        prop_assert!(ab.upper >= 1.0 - 1e-9);
        prop_assert!((ab.upper - ba.upper).abs() <= 0.05 * ab.upper);
        let check = distortion(&ab.upper_witness, &a, &b).unwrap();
        prop_assert!((check - ab.upper).abs() <= 1e-8 * check);
    }
}

#[test]
fn cross_polytope_and_cube_are_polar() {
    for n in 2..=4 {
        let cube = VPolytope::cube(n);
        let cross = VPolytope::cross_polytope(n);
        let h = polar(&cross).unwrap();
        for v in cube.generator_rows() {
            assert!((h.gauge(v) - 1.0).abs() < 1e-12);
        }
    }
}
