//! Cross-shaped droplet under a rotating boundary.
//!
//! `cargo run --release --example rotational -- 32 0.2`

use chns::diagnostics::phi_bounds;
use chns::scenarios::scenario_rotational;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(16, |a| a.parse().expect("cells"));
    let t_final: f64 = args.next().map_or(0.1, |a| a.parse().expect("final time"));
    let mut spec = scenario_rotational();
    spec.nx = n;
    spec.ny = n;
    spec.t_final = t_final;
    let steps = spec.n_steps();
    let (mut stepper, state) = spec.build()?;
    let (end, d) = stepper.advance(state, steps, |s, d| {
        if s.step % 10 == 0 {
            println!("t = {:.3}  mass = {:.12e}  |u|max = {:.3}", d.t, d.mass, s.u.max_abs());
        }
        Ok(())
    })?;
    let (lo, hi) = phi_bounds(&end.phi);
    println!("t = {:.3}: phi in [{lo:.4}, {hi:.4}], {} steps", end.t, d.len());
    Ok(())
}
