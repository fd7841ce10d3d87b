//! Rayleigh-Taylor instability with Boussinesq buoyancy; tracks the falling spike.
//!
//! `cargo run --release --example rayleigh_taylor -- 16 0.3 [dt]`

use chns::diagnostics::{interface_heights, interface_minimum};
use chns::scenarios::scenario_rayleigh_taylor;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(8, |a| a.parse().expect("cells"));
    let t_final: f64 = args.next().map_or(0.2, |a| a.parse().expect("final time"));
    let mut spec = scenario_rayleigh_taylor(0.01);
    spec.nx = n;
    spec.ny = 4 * n;
    spec.t_final = t_final;
    if let Some(dt) = args.next() {
        spec.scheme.dt = dt.parse().expect("time step");
    }
    let steps = spec.n_steps();
    let every = (0.05 / spec.scheme.dt).round().max(1.0) as usize;
    let (mut stepper, mut state) = spec.build()?;
    for _ in 0..steps {
        state = stepper.step(&state)?.0;
        if state.step % every == 0 {
            let space = &stepper.ops().phase;
            let h = interface_heights(space, &state.phi);
            let edge = h[0].1.unwrap_or(f64::NAN);
            if let Some((x, y)) = interface_minimum(space, &state.phi) {
                let peak = state.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                println!("t = {:.3}: lowest interface point ({x:.3}, {y:.4}), wall height {edge:.4}, max|phi| {peak:.4}, max|u| {:.2}", state.t, state.u.max_abs());
            }
        }
    }
    Ok(())
}
