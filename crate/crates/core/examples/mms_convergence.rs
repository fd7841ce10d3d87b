//! Spatial convergence on the manufactured solution.
//!
//! `cargo run --release --example mms_convergence -- 2 8,16,32`

use chns::app::spatial_study;
use chns::scenarios::{scenario_mms_ladder, StepLaw};

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map_or(2, |a| a.parse().expect("degree"));
    let ladder: Vec<usize> = args
        .next()
        .map_or_else(|| vec![4, 8, 16], |a| a.split(',').map(|v| v.parse().expect("ladder")).collect());
    let law = StepLaw::for_degree(k);
    println!("Q{k}, dt = {law:?}, T = 1");
    print!("{}", spatial_study(&scenario_mms_ladder(k, &ladder, law))?);
    Ok(())
}
