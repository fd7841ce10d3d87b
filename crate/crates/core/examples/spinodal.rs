//! Spinodal decomposition through the run driver: diagnostics.csv,
//! snapshots and run.json in the output directory.
//!
//! `cargo run --release --example spinodal -- out/spinodal 32 0.1`

use std::path::PathBuf;

use chns::app::{run, RunConfig, SnapshotFormat};
use chns::scenarios::ScenarioKind;

fn main() -> chns::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map_or_else(|| std::env::temp_dir().join("chns-spinodal"), PathBuf::from);
    let n: usize = args.next().map_or(16, |a| a.parse().expect("cells"));
    let t_final: f64 = args.next().map_or(0.05, |a| a.parse().expect("final time"));
    let mut cfg = RunConfig {
        scenario: ScenarioKind::Spinodal,
        nx: Some(n),
        t_final: Some(t_final),
        seed: Some(42),
        ..RunConfig::default()
    };
    cfg.output.dir = dir;
    cfg.output.format = SnapshotFormat::Vtk;
    cfg.output.snapshot_every = 25;
    let s = run(&cfg)?;
    let first = &s.diagnostics[0];
    let last = s.diagnostics.last().expect("records");
    println!("wrote {} ({} snapshots)", s.dir.display(), s.metadata.snapshots.len());
    println!("energy {:.6e} -> {:.6e}", first.energy, last.energy);
    println!("mass drift {:.2e}", (last.mass - first.mass).abs());
    println!("phi range [{:.4}, {:.4}]", last.phi_min, last.phi_max);
    Ok(())
}
