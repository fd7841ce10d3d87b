use chns::potential::*;

#[test]
fn symmetric_zeros() {
    assert_eq!(convex_force(0.0).unwrap(), 0.0);
    assert_eq!(free_energy(0.0, 2.0).unwrap(), 0.0);
    assert_eq!(concave_force(0.0, 2.0), 0.0);
}

#[test]
fn reference_values() {
    // 0.5 ln 3
    assert!((convex_force(0.5).unwrap() - 0.549_306_144_334_054_8).abs() < 1e-15);
    // 0.5(1.5 ln 1.5 + 0.5 ln 0.5) - 0.25
    let expect = 0.5 * (1.5 * 1.5f64.ln() + 0.5 * 0.5f64.ln()) - 0.25;
    assert!((free_energy(0.5, 2.0).unwrap() - expect).abs() < 1e-15);
    assert!((expect - (-0.119_188)).abs() < 5e-6);
}

#[test]
fn domain_errors() {
    assert!(convex_force(1.0).is_err());
    assert!(convex_energy(-1.0).is_err());
    assert!(free_energy(1.5, 2.0).is_err());
    assert!(secant_quotient(0.2, 1.0, SECANT_THRESHOLD).is_err());
    assert!(convex_force(f64::NAN).is_err());
}

#[test]
fn clamp_values() {
    assert_eq!(clamp(1.5), 1.0);
    assert_eq!(clamp(-0.3), -0.3);
    assert_eq!(clamp(-2.0), -1.0);
}

#[test]
fn regularized_force() {
    assert_eq!(convex_force_regularized(0.0, 5.0), 0.0);
    assert_eq!(convex_force_regularized(0.9, 100.0), convex_force(0.9).unwrap());
    let expect = convex_force(0.9).unwrap() + 0.1 / (1.0 - 0.81);
    assert!((convex_force_regularized(1.0, 10.0) - expect).abs() < 1e-14);
    assert!((convex_force_regularized(-1.0, 10.0) + expect).abs() < 1e-14);
}

#[test]
fn secant_limit_and_symmetry() {
    let g = secant_quotient(0.3, 0.3, SECANT_THRESHOLD).unwrap();
    assert!((g - 0.309_519_604_203_111_7).abs() < 1e-15);
    let (a, b) = (0.6, 0.2);
    assert_eq!(
        secant_quotient(a, b, SECANT_THRESHOLD).unwrap(),
        secant_quotient(b, a, SECANT_THRESHOLD).unwrap()
    );
}

#[test]
fn secant_matches_quadrature_of_force() {
    // composite Simpson on [0.2, 0.6] with many panels as an independent route
    let n = 2000;
    let h = 0.4 / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = 0.2 + h * i as f64;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * convex_force(x).unwrap();
    }
    let integral = s * h / 3.0;
    let g = secant_quotient(0.6, 0.2, SECANT_THRESHOLD).unwrap();
    assert!((g - integral / 0.4).abs() < 1e-12);
}

#[test]
fn mobility_and_viscosity() {
    let p = PhysParams {
        mobility: Mobility::Constant(0.1),
        ..Default::default()
    };
    assert_eq!(p.mobility(0.7), 0.1);
    assert_eq!(p.viscosity(0.3), 1.0);
    let q = PhysParams {
        viscosity_ratio: 3.0,
        ..Default::default()
    };
    assert_eq!(q.viscosity(-1.0), 1.0);
    assert_eq!(q.viscosity(1.0), 3.0);
}

#[test]
fn buoyancy_values() {
    let b = Buoyancy { rho1: 3.0, rho2: 1.0, g: 10.0 };
    assert_eq!(b.force(1.0), -20.0);
    assert_eq!(b.force(-1.0), 20.0);
    let even = Buoyancy { rho1: 2.0, rho2: 2.0, g: 10.0 };
    assert_eq!(even.force(0.7), 0.0);
}

#[test]
fn validation() {
    assert!(PhysParams::default().validate().is_ok());
    let p = PhysParams { theta_c: 1.0, ..Default::default() };
    assert!(p.validate().is_err());
    let p = PhysParams { mobility: Mobility::Constant(0.0), ..Default::default() };
    assert!(p.validate().is_err());
}

/// Mean of `f_v` over `[b, a]` by 5-point Gauss-Legendre.
fn mean_force(a: f64, b: f64) -> f64 {
    let nodes = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
    let weights = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let (m, r) = (0.5 * (a + b), 0.5 * (a - b));
    0.5 * nodes.iter().zip(&weights).map(|(x, w)| w * convex_force(m + r * x).unwrap()).sum::<f64>()
}

#[test]
fn secant_is_accurate_for_close_arguments() {
    for (a, b) in [(0.3, 0.3 + 2e-7), (0.3, 0.3 + 1e-5), (-0.97, -0.97 + 3e-6), (0.999, 0.999 - 1e-6)] {
        let g = secant_quotient(a, b, SECANT_THRESHOLD).unwrap();
        let oracle = mean_force(a, b);
        assert!((g - oracle).abs() < 1e-14 * oracle.abs().max(1.0), "{a} {b}: {g} vs {oracle}");
        // derivative against a difference of the oracle
        let h = 1e-9;
        let fd = (mean_force(a + h, b) - mean_force(a - h, b)) / (2.0 * h);
        let d = secant_quotient_derivative(a, b, SECANT_THRESHOLD).unwrap();
        assert!((fd - d).abs() < 1e-5 * d.abs(), "{a} {b}: {fd} vs {d}");
    }
}
