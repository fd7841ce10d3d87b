use chns::femspace::{lumped_inner, ScalarSpace};
use chns::linalg::CsrMatrix;
use chns::mesh::{build_mesh, gauss_lobatto_rule, Bounds};
use chns::potential::*;
use proptest::prelude::*;

fn open_interval() -> impl Strategy<Value = f64> {
    -0.999f64..0.999
}

proptest! {
    #[test]
    fn convex_energy_is_even_and_force_odd(x in open_interval()) {
        prop_assert!((convex_energy(x).unwrap() - convex_energy(-x).unwrap()).abs() < 1e-15);
        prop_assert!((convex_force(x).unwrap() + convex_force(-x).unwrap()).abs() < 1e-13);
        prop_assert!(convex_force_derivative(x).unwrap() >= 1.0);
    }

    #[test]
    fn secant_lies_between_endpoint_forces(a in open_interval(), b in open_interval()) {
        prop_assume!((a - b).abs() > 1e-4);
        let g = secant_quotient(a, b, SECANT_THRESHOLD).unwrap();
        let (fa, fb) = (convex_force(a).unwrap(), convex_force(b).unwrap());
        let tol = 1e-9 * (1.0 + fa.abs().max(fb.abs()));
        prop_assert!(g >= fa.min(fb) - tol && g <= fa.max(fb) + tol);
        prop_assert!((g - secant_quotient(b, a, SECANT_THRESHOLD).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn secant_derivative_matches_difference(a in -0.9f64..0.9, b in -0.9f64..0.9) {
        prop_assume!((a - b).abs() > 1e-2);
        let h = 1e-6;
        let fd = (secant_quotient(a + h, b, SECANT_THRESHOLD).unwrap()
            - secant_quotient(a - h, b, SECANT_THRESHOLD).unwrap()) / (2.0 * h);
        let d = secant_quotient_derivative(a, b, SECANT_THRESHOLD).unwrap();
        prop_assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "{fd} vs {d}");
    }

    #[test]
    fn concave_part_lies_below_tangent(a in open_interval(), b in open_interval(), theta in 1.01f64..4.0) {
        let lhs = concave_energy(a, theta) - concave_energy(b, theta);
        let rhs = concave_force(b, theta) * (a - b);
        prop_assert!(lhs <= rhs + 1e-14);
    }

    #[test]
    fn lobatto_rule_exactness(n in 2usize..8, coeffs in proptest::collection::vec(-1.0f64..1.0, 14)) {
        let rule = gauss_lobatto_rule(n).unwrap();
        let deg = 2 * n - 3;
        let poly = |x: f64| coeffs[..=deg].iter().rev().fold(0.0, |acc, c| acc * x + c);
        let quad: f64 = rule.points.iter().zip(&rule.weights).map(|(&x, &w)| w * poly(x)).sum();
        // exact integral over [-1, 1]
        let exact: f64 = coeffs[..=deg]
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { 2.0 * c / (k as f64 + 1.0) } else { 0.0 })
            .sum();
        prop_assert!((quad - exact).abs() < 1e-13);
    }

    #[test]
    fn csr_matvec_matches_dense(
        entries in proptest::collection::vec((0usize..7, 0usize..5, -3.0f64..3.0), 0..30),
        x in proptest::collection::vec(-2.0f64..2.0, 5),
    ) {
        let a = CsrMatrix::from_triplets(7, 5, &entries);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(7, 5);
        for &(r, c, v) in &entries {
            dense[(r, c)] += v;
        }
        let y = a.matvec(&x);
        let yd = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..7 {
            prop_assert!((y[i] - yd[i]).abs() < 1e-12);
        }
        let yt = a.transpose().matvec(&y);
        let ytd = dense.transpose() * &yd;
        for i in 0..5 {
            prop_assert!((yt[i] - ytd[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolation_is_exact_on_qk(k in 2usize..4, a in -1.0f64..1.0, b in -1.0f64..1.0, px in 0.0f64..1.0, py in 0.0f64..1.0) {
        let mesh = build_mesh(Bounds::new(0.0, 2.0, -1.0, 1.0), 3, 2, k).unwrap();
        let space = ScalarSpace::new(&mesh).unwrap();
        let f = |x: [f64; 2]| a * x[0].powi(k as i32) * x[1] + b * x[1].powi(k as i32) + x[0] * x[1];
        let v = space.interpolate(f);
        let pt = [2.0 * px, -1.0 + 2.0 * py];
        prop_assert!((space.evaluate(&v, pt) - f(pt)).abs() < 1e-12);
    }

    #[test]
    fn lumped_inner_is_symmetric_and_positive(seed in proptest::collection::vec(-1.0f64..1.0, 25)) {
        let mesh = build_mesh(Bounds::UNIT_SQUARE, 2, 2, 2).unwrap();
        let space = ScalarSpace::new(&mesh).unwrap();
        let v: Vec<f64> = seed.iter().rev().copied().collect();
        let uv = lumped_inner(&space, &seed, &v).unwrap();
        prop_assert!((uv - lumped_inner(&space, &v, &seed).unwrap()).abs() < 1e-15);
        prop_assert!(lumped_inner(&space, &seed, &seed).unwrap() >= 0.0);
    }
}
