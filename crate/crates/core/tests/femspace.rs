use chns::femspace::*;
use chns::mesh::GridMesh;
use chns::mesh::{build_mesh, Bounds};

#[test]
fn lagrange_basis_is_nodal() {
    let r = chns::mesh::gauss_lobatto_rule(4).unwrap();
    let b = LagrangeBasis1d::new(r.points.clone());
    for a in 0..4 {
        for (m, &x) in r.points.iter().enumerate() {
            let expect = if a == m { 1.0 } else { 0.0 };
            assert!((b.value(a, x) - expect).abs() < 1e-14);
        }
    }
    // derivative of the partition of unity vanishes
    let s: f64 = (0..4).map(|a| b.derivative(a, 0.3)).sum();
    assert!(s.abs() < 1e-13);
}

#[test]
fn lumped_weights_sum_to_area() {
    for k in 1..=4 {
        let m = build_mesh(Bounds::new(0.0, 2.0, -1.0, 0.5), 3, 5, k).unwrap();
        let s = ScalarSpace::new(&m).unwrap();
        let total: f64 = s.lumped_weights().iter().sum();
        assert!((total - 3.0).abs() < 1e-12 * 3.0);
        assert!(s.lumped_weights().iter().all(|&w| w > 0.0));
    }
}

#[test]
fn lumped_inner_examples() {
    for k in 1..=3 {
        let s = ScalarSpace::new(&GridMesh::unit_square(3, k).unwrap()).unwrap();
        let one = vec![1.0; s.dim()];
        assert!((lumped_inner(&s, &one, &one).unwrap() - 1.0).abs() < 1e-14);
        let x = s.interpolate(|p| p[0]);
        assert!((lumped_inner(&s, &one, &x).unwrap() - 0.5).abs() < 1e-14);
        let consistent = chns::linalg::dot(&one, &s.assemble_mass().matvec(&one));
        assert!((consistent - 1.0).abs() < 1e-13);
    }
}

#[test]
fn space_mismatch() {
    let s = ScalarSpace::new(&GridMesh::unit_square(2, 2).unwrap()).unwrap();
    assert!(lumped_inner(&s, &[1.0; 3], &[1.0; 3]).is_err());
}

#[test]
fn l1_norm_examples() {
    let s = ScalarSpace::new(&GridMesh::unit_square(4, 2).unwrap()).unwrap();
    assert_eq!(discrete_l1_norm(&s, &vec![0.0; s.dim()]).unwrap(), 0.0);
    assert!((discrete_l1_norm(&s, &vec![-3.0; s.dim()]).unwrap() - 3.0).abs() < 1e-13);
    let alt: Vec<f64> = (0..s.dim()).map(|i| if i % 2 == 0 { 0.7 } else { -0.7 }).collect();
    assert!((discrete_l1_norm(&s, &alt).unwrap() - 0.7).abs() < 1e-13);
}

#[test]
fn stiffness_examples() {
    let s = ScalarSpace::new(&GridMesh::unit_square(3, 2).unwrap()).unwrap();
    let k = s.assemble_stiffness(&Coefficient::Constant(1.0)).unwrap();
    let x = s.interpolate(|p| p[0]);
    assert!((chns::linalg::dot(&x, &k.matvec(&x)) - 1.0).abs() < 1e-12);
    let ones = vec![1.0; s.dim()];
    assert!(chns::linalg::norm_inf(&k.matvec(&ones)) < 1e-12);
    assert!(k.max_asymmetry() < 1e-13);
    let phi = vec![0.0; s.dim()];
    let law = |_: f64| 0.1;
    let km = s
        .assemble_stiffness(&Coefficient::Field { nodal: &phi, law: &law })
        .unwrap();
    let diff = km.add_scaled(-0.1, &k);
    assert!(chns::linalg::norm_inf(diff.values()) < 1e-14);
    let neg = |_: f64| -1.0;
    assert!(s
        .assemble_stiffness(&Coefficient::Field { nodal: &phi, law: &neg })
        .is_err());
}

#[test]
fn divergence_kernels() {
    let s = ScalarSpace::new(&GridMesh::unit_square(3, 2).unwrap()).unwrap();
    let p = PressureSpace::for_velocity(&s).unwrap();
    let b = assemble_divergence(&s, &p).unwrap();
    let u = VectorField {
        x: s.interpolate(|x| x[0]),
        y: s.interpolate(|x| -x[1]),
    };
    assert!(chns::linalg::norm_inf(&b.matvec(&u.to_flat())) < 1e-13);
    let u = VectorField {
        x: s.interpolate(|x| x[0]),
        y: vec![0.0; s.dim()],
    };
    let mut q = vec![1.0; p.dim()];
    p.remove_mean(&mut q);
    assert!(chns::linalg::dot(&b.matvec(&u.to_flat()), &q).abs() < 1e-13);
}

#[test]
fn pressure_space_requires_degree_two() {
    let s = ScalarSpace::new(&GridMesh::unit_square(2, 1).unwrap()).unwrap();
    assert!(PressureSpace::for_velocity(&s).is_err());
}

#[test]
fn interpolation_reproduces_qk() {
    let s = ScalarSpace::new(&GridMesh::unit_square(2, 3).unwrap()).unwrap();
    let f = |p: [f64; 2]| p[0].powi(3) * p[1] - 2.0 * p[1].powi(3) + p[0] * p[1] * p[1];
    let v = s.interpolate(f);
    for x in [[0.13, 0.77], [0.5, 0.5], [0.91, 0.02]] {
        assert!((s.evaluate(&v, x) - f(x)).abs() < 1e-13);
    }
}

#[test]
fn boundary_load_of_constant_flux_is_perimeter() {
    let s = ScalarSpace::new(&GridMesh::unit_square(3, 2).unwrap()).unwrap();
    let b = s.boundary_load(3, |_, _| 1.0).unwrap();
    assert!((b.iter().sum::<f64>() - 4.0).abs() < 1e-13);
    // outward flux of the field (x, y) integrates to 2|Omega|
    let b = s.boundary_load(3, |x, n| x[0] * n[0] + x[1] * n[1]).unwrap();
    assert!((b.iter().sum::<f64>() - 2.0).abs() < 1e-13);
}

#[test]
fn boundary_flux_load_examples() {
    let mesh = build_mesh(Bounds::UNIT_SQUARE, 3, 2, 2).unwrap();
    let space = ScalarSpace::new(&mesh).unwrap();
    let phi = space.interpolate(|x| x[0]);
    // u = (x^2, y): flux phi u.n is 1 on the right edge and 1/2 on the top edge
    let u = VectorField {
        x: space.interpolate(|x| x[0] * x[0]),
        y: space.interpolate(|x| x[1]),
    };
    let total: f64 = space.boundary_flux_load(&phi, &u).iter().sum();
    assert!((total - 1.5).abs() < 1e-14, "{total}");
    // tangential fields carry no flux
    let t = VectorField {
        x: space.interpolate(|x| x[0] * (1.0 - x[0])),
        y: space.interpolate(|x| x[1] * (1.0 - x[1])),
    };
    assert!(space.boundary_flux_load(&phi, &t).iter().all(|&v| v == 0.0));
}
