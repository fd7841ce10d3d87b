//! Pressure-correction identities on a driven flow.

use chns::scenarios::scenario_mms;

fn main() -> chns::Result<()> {
    let spec = scenario_mms(2, 8, 1.0 / 32.0);
    let (mut stepper, mut state) = spec.build()?;
    println!("{:>4} {:>12} {:>12} {:>12}", "n", "||B u||", "identity", "lin. resid");
    for _ in 0..8 {
        let (next, r) = stepper.step(&state)?;
        println!(
            "{:>4} {:>12.3e} {:>12.3e} {:>12.3e}",
            next.step, r.divergence, r.projection_identity, r.projection_residual
        );
        state = next;
    }
    Ok(())
}
