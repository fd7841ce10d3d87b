//! Stratified two-phase lid-driven cavity.
//!
//! `cargo run --release --example lid_driven -- 32 0.2`

use chns::scenarios::scenario_lid_driven;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(16, |a| a.parse().expect("cells"));
    let t_final: f64 = args.next().map_or(0.1, |a| a.parse().expect("final time"));
    let mut spec = scenario_lid_driven();
    spec.nx = n;
    spec.ny = n;
    spec.t_final = t_final;
    let steps = spec.n_steps();
    let (mut stepper, state) = spec.build()?;
    let (end, _) = stepper.advance(state, steps, |_, _| Ok(()))?;
    let space = &stepper.ops().phase;
    println!("t = {:.3}", end.t);
    for y in [0.9, 0.75, 0.5, 0.25, 0.1] {
        let ux = space.evaluate(&end.u.x, [0.5, y]);
        let phi = space.evaluate(&end.phi, [0.5, y]);
        println!("  y = {y:.2}: u_x = {ux:+.4e}  phi = {phi:+.4}");
    }
    Ok(())
}
