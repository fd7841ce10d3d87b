//! Temporal Cauchy differences on a fixed mesh.
//!
//! `cargo run --release --example temporal_convergence -- 16 8,16,32`

use chns::app::temporal_study;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(8, |a| a.parse().expect("mesh"));
    let inv: Vec<usize> = args
        .next()
        .map_or_else(|| vec![8, 16, 32], |a| a.split(',').map(|v| v.parse().expect("1/dt")).collect());
    println!("Q2 on {n}x{n}, Cauchy differences at T = 1");
    print!("{}", temporal_study(2, n, &inv)?);
    Ok(())
}
