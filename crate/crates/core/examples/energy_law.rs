//! The discrete energy law step by step: E^{n+1} + dissipation <= E^n.

use chns::scenarios::scenario_spinodal;

fn main() -> chns::Result<()> {
    let mut spec = scenario_spinodal(3);
    spec.nx = 16;
    spec.ny = 16;
    let (mut stepper, state) = spec.build()?;
    let (_, d) = stepper.advance(state, 40, |_, _| Ok(()))?;
    println!("{:>4} {:>16} {:>12} {:>12} {:>10}", "n", "E^n", "D_ch", "D_ns", "slack");
    for w in d.windows(2) {
        let slack = w[1].energy + w[1].dissipation_ch + w[1].dissipation_ns - w[0].energy;
        println!(
            "{:>4} {:>16.10e} {:>12.4e} {:>12.4e} {:>10.1e}",
            w[1].step, w[1].energy, w[1].dissipation_ch, w[1].dissipation_ns, slack
        );
    }
    Ok(())
}
