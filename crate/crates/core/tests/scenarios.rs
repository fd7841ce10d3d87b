use chns::diagnostics::total_mass;
use chns::scenarios::*;

fn shrink(mut s: ScenarioSpec, n: usize) -> ScenarioSpec {
    let aspect = s.ny / s.nx;
    s.nx = n;
    s.ny = n * aspect;
    s
}

#[test]
fn rayleigh_taylor_initial_layers() {
    let spec = shrink(scenario_rayleigh_taylor(0.01), 4);
    let (st, s0) = spec.build().unwrap();
    let m = st.ops().phase.mesh();
    let top = m.node_index(0, m.nodes_y() - 1);
    let bottom = m.node_index(0, 0);
    assert!((s0.phi[top] - 0.9).abs() < 1e-12);
    assert!((s0.phi[bottom] + 0.9).abs() < 1e-12);
    assert_eq!(m.bounds.y_max, 4.0);
    assert!(s0.u.max_abs() == 0.0);
}

#[test]
fn rotational_initial_data() {
    let spec = shrink(scenario_rotational(), 8);
    let (st, s0) = spec.build().unwrap();
    let coords = st.ops().phase.node_coords();
    for (i, x) in coords.iter().enumerate() {
        let g = rotational_velocity(*x);
        assert!((s0.u.x[i] - g[0]).abs() < 1e-14);
        assert!((s0.u.y[i] - g[1]).abs() < 1e-14);
    }
    // centre lies inside the cross, corners outside
    let c = coords.iter().position(|x| (x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12).unwrap();
    let expect = 0.9 * (0.1 / (std::f64::consts::SQRT_2 * 0.01)).tanh();
    assert!((s0.phi[c] - expect).abs() < 1e-15);
    assert!((s0.phi[0] + 0.9).abs() < 1e-12);
}

#[test]
fn cross_distance_values() {
    assert!((cross_signed_distance([0.5, 0.5], 0.1, 0.3) + 0.1).abs() < 1e-15);
    assert!((cross_signed_distance([0.5, 0.9], 0.1, 0.3) - 0.1).abs() < 1e-15);
    assert!((cross_signed_distance([0.65, 0.5], 0.1, 0.3) + 0.1).abs() < 1e-15);
    // in the notch between two arms: nearest point is on an arm side
    assert!((cross_signed_distance([0.7, 0.7], 0.1, 0.3) - 0.1).abs() < 1e-15);
    // beyond the tip corner of an arm
    let d = cross_signed_distance([0.7, 0.9], 0.1, 0.3);
    assert!((d - 0.1f64.hypot(0.1)).abs() < 1e-15);
}

#[test]
fn lid_profile_values() {
    assert_eq!(lid_profile(0.0), 0.0);
    assert_eq!(lid_profile(1.0), 0.0);
    assert!((lid_profile(0.5) - 1.0).abs() < 1e-15);
    let spec = shrink(scenario_lid_driven(), 4);
    let (st, s0) = spec.build().unwrap();
    let m = st.ops().phase.mesh();
    let j = m.nodes_y() - 1;
    for i in 0..m.nodes_x() {
        let node = m.node_index(i, j);
        assert!((s0.u.x[node] - lid_profile(m.lattice_x(i))).abs() < 1e-15);
        assert_eq!(s0.u.y[node], 0.0);
    }
}

#[test]
fn spinodal_is_reproducible_per_seed() {
    let a = shrink(scenario_spinodal(42), 8).build().unwrap().1;
    let b = shrink(scenario_spinodal(42), 8).build().unwrap().1;
    let c = shrink(scenario_spinodal(43), 8).build().unwrap().1;
    assert_eq!(a.phi, b.phi);
    assert_ne!(a.phi, c.phi);
    assert!(a.phi.iter().all(|v| (v - 0.2).abs() <= 0.01));
}

#[test]
fn spinodal_steps_are_reproducible() {
    let spec = {
        let mut s = shrink(scenario_spinodal(5), 6);
        s.t_final = 4e-3;
        s
    };
    let go = || {
        let (mut st, s0) = spec.build().unwrap();
        let m0 = total_mass(st.ops(), &s0.phi);
        let (end, _) = st.advance(s0, spec.n_steps(), |_, _| Ok(())).unwrap();
        let m1 = total_mass(st.ops(), &end.phi);
        assert!((m1 - m0).abs() < 1e-14);
        end
    };
    let a = go();
    let b = go();
    assert_eq!(a, b);
    assert_eq!(a.step, 4);
}

#[test]
fn step_counts_and_ladders() {
    let mut s = scenario_spinodal(1);
    s.t_final = 1.0;
    s.scheme.dt = 1e-3;
    assert_eq!(s.n_steps(), 1000);
    let ladder = scenario_mms_ladder(2, &[8, 16], StepLaw::ThreeHalves);
    for spec in &ladder {
        let steps = spec.n_steps() as f64;
        assert!((steps * spec.scheme.dt - 1.0).abs() < 1e-12);
        assert!(spec.scheme.dt <= (1.0 / spec.nx as f64).powf(1.5) + 1e-15);
    }
    assert_eq!(StepLaw::for_degree(3), StepLaw::FourHSquared);
    assert!((StepLaw::FourHSquared.dt(0.125) - 0.0625).abs() < 1e-15);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = shrink(scenario_spinodal(1), 4);
    s.degree = 1;
    assert!(s.build().is_err());
    let mut s = shrink(scenario_spinodal(1), 4);
    s.params.theta_c = 1.0;
    assert!(s.build().is_err());
    let mut s = shrink(scenario_rotational(), 4);
    s.boundary_velocity = None;
    assert!(s.build().is_err());
}

#[test]
fn rotational_flow_through_walls_keeps_mass() {
    let mut spec = shrink(scenario_rotational(), 16);
    spec.t_final = 10.0 * spec.scheme.dt;
    let (mut st, s0) = spec.build().unwrap();
    let m0 = total_mass(st.ops(), &s0.phi);
    let (end, _) = st.advance(s0, spec.n_steps(), |_, _| Ok(())).unwrap();
    assert!((total_mass(st.ops(), &end.phi) - m0).abs() < 1e-13);
    assert!(end.max_abs_phi() < 1.0);
}
