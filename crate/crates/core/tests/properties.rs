use carnot_core::calculus::probe_field;
use carnot_core::functional::{Functional, QuadraturePolicy};
use carnot_core::integrand::{Integrand, IntegrandSpec, Plane};
use carnot_core::recovery::recover_integrand;
use carnot_core::{
    convolve, erode_domain, GridDomain, GroupPoint, HomogeneousNorm, HorizontalVector, MollifierFamily, ScalarField,
    StratifiedGroup,
};
use proptest::prelude::*;

const PRESETS: [&str; 5] = ["euclidean:2", "euclidean:3", "heisenberg:1", "heisenberg:2", "engel"];

fn preset() -> impl Strategy<Value = StratifiedGroup> {
    prop::sample::select(PRESETS.to_vec()).prop_map(|name| StratifiedGroup::preset(name).unwrap())
}

fn norm() -> impl Strategy<Value = HomogeneousNorm> {
    prop::sample::select(vec![HomogeneousNorm::WeightedMax, HomogeneousNorm::Koranyi])
}

/// A group together with `k` points in it.
fn group_and_points(k: usize) -> impl Strategy<Value = (StratifiedGroup, Vec<GroupPoint>)> {
    preset().prop_flat_map(move |g| {
        let n = g.dim();
        let pts = prop::collection::vec(prop::collection::vec(-2.0..2.0f64, n), k);
        (Just(g), pts.prop_map(|v| v.into_iter().map(GroupPoint::new).collect()))
    })
}

fn close(a: &GroupPoint, b: &GroupPoint) -> bool {
    a.max_abs_diff(b) <= 1e-11
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn multiplication_is_associative((g, p) in group_and_points(3)) {
        let left = g.multiply(&g.multiply(&p[0], &p[1]).unwrap(), &p[2]).unwrap();
        let right = g.multiply(&p[0], &g.multiply(&p[1], &p[2]).unwrap()).unwrap();
        prop_assert!(close(&left, &right));
    }

    #[test]
    fn inverse_and_identity((g, p) in group_and_points(1)) {
        let e = GroupPoint::origin(g.dim());
        let inv = g.inverse(&p[0]).unwrap();
        prop_assert!(close(&g.multiply(&p[0], &inv).unwrap(), &e));
        prop_assert!(close(&g.multiply(&inv, &p[0]).unwrap(), &e));
        prop_assert!(close(&g.multiply(&e, &p[0]).unwrap(), &p[0]));
    }

    #[test]
    fn dilations_are_automorphisms((g, p) in group_and_points(2), lambda in 0.1..3.0f64) {
        let lhs = g.dilate(lambda, &g.multiply(&p[0], &p[1]).unwrap()).unwrap();
        let rhs = g.multiply(&g.dilate(lambda, &p[0]).unwrap(), &g.dilate(lambda, &p[1]).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * (1.0 + lambda.powi(3)));
    }

    #[test]
    fn norm_axioms((g, p) in group_and_points(1), nm in norm(), lambda in 0.1..3.0f64) {
        let x = &p[0];
        let r = g.norm(nm, x).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!((g.norm(nm, &g.inverse(x).unwrap()).unwrap() - r).abs() <= 1e-12 * (1.0 + r));
        let scaled = g.norm(nm, &g.dilate(lambda, x).unwrap()).unwrap();
        prop_assert!((scaled - lambda * r).abs() <= 1e-11 * (1.0 + lambda * r));
        prop_assert_eq!(g.norm(nm, &GroupPoint::origin(g.dim())).unwrap(), 0.0);
    }

    #[test]
    fn distances_are_translation_invariant((g, p) in group_and_points(3), nm in norm()) {
        let (x, y, z) = (&p[0], &p[1], &p[2]);
        let d = g.dist_left(nm, x, y).unwrap();
        let dl = g.dist_left(nm, &g.multiply(z, x).unwrap(), &g.multiply(z, y).unwrap()).unwrap();
        prop_assert!((d - dl).abs() <= 1e-10 * (1.0 + d));
        let e = g.dist_right(nm, x, y).unwrap();
        let er = g.dist_right(nm, &g.multiply(x, z).unwrap(), &g.multiply(y, z).unwrap()).unwrap();
        prop_assert!((e - er).abs() <= 1e-10 * (1.0 + e));
    }

    #[test]
    fn integrands_are_midpoint_convex(
        a in prop::collection::vec(-3.0..3.0f64, 2),
        b in prop::collection::vec(-3.0..3.0f64, 2),
        p in 1.0..4.0f64,
        planes in prop::collection::vec((prop::collection::vec(-2.0..2.0f64, 2), -1.0..1.0f64), 1..6),
    ) {
        let specs = [
            IntegrandSpec::power(p),
            IntegrandSpec::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
            IntegrandSpec::max_affine(planes.into_iter().map(|(a, b)| Plane { a, b }).collect()),
        ];
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        for spec in specs {
            let f = Integrand::new(spec, 2).unwrap();
            let gap = f.eval(&mid) - 0.5 * (f.eval(&a) + f.eval(&b));
            prop_assert!(gap <= 1e-12 * (1.0 + f.eval(&a).abs() + f.eval(&b).abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn erosion_shrinks_monotonically(e1 in 0.05..0.3f64, extra in 0.05..0.3f64, nm in norm()) {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let omega = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[8; 3]).unwrap();
        let small = erode_domain(&g, nm, &omega, e1).unwrap();
        let smaller = erode_domain(&g, nm, &omega, e1 + extra).unwrap();
        prop_assert!(small.is_subset_of(&omega));
        prop_assert!(smaller.is_subset_of(&small));
    }

    #[test]
    fn energy_is_additive_over_disjoint_sets(at in -0.9..0.9f64, axis in 0usize..3, xi in prop::collection::vec(-2.0..2.0f64, 2)) {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let f = Functional::integral(&g, Integrand::power(2.0, 2).unwrap(), QuadraturePolicy::midpoint()).unwrap();
        let u = ScalarField::linear_combination(
            vec![(1.0, probe_field(&g, &HorizontalVector(xi)).unwrap()),
                 (0.3, ScalarField::from_fn(3, |x| (x[0] * x[2]).sin()))],
            0.0,
        ).unwrap();
        let a = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[6; 3]).unwrap();
        let (lo, hi) = a.split(axis, at);
        let whole = f.eval(&u, &a).unwrap();
        let parts = f.eval(&u, &lo).unwrap() + f.eval(&u, &hi).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole.abs()));
    }

    #[test]
    fn recovery_is_exact_on_probes(xi in prop::collection::vec(-4.0..4.0f64, 2), p in 1.0..3.0f64) {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let integrand = Integrand::power(p, 2).unwrap();
        let f = Functional::integral(&g, integrand.clone(), QuadraturePolicy::midpoint()).unwrap();
        let a0 = GridDomain::ball(&g, HomogeneousNorm::WeightedMax, &[0.0; 3], 1.0, 6).unwrap();
        let rec = recover_integrand(&f, &a0, std::slice::from_ref(&xi)).unwrap();
        let exact = integrand.eval(&xi);
        prop_assert!((rec.values[0] - exact).abs() <= 1e-11 * (1.0 + exact));
    }

    #[test]
    fn mollifying_a_constant_is_exact(c in -5.0..5.0f64, eps in 0.05..0.4f64) {
        let g = StratifiedGroup::heisenberg(1).unwrap();
        let mf = MollifierFamily::new(&g, HomogeneousNorm::Koranyi, 7).unwrap();
        let omega = GridDomain::new_box(&[-1.0; 3], &[1.0; 3], &[4; 3]).unwrap();
        let m = convolve(&mf, eps, &ScalarField::constant(3, c), &omega).unwrap();
        let field = m.field();
        for idx in m.domain().masked_indices() {
            let x = m.domain().center(idx);
            prop_assert!((field.value(&x).unwrap() - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }
}
