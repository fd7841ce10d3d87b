//! Gauss-Lobatto rules, exactness and the lumped mass of a Q_k space.
//!
//! `cargo run --example quadrature -- 3`

use chns::femspace::ScalarSpace;
use chns::mesh::{GaussLobattoRule, GridMesh};

fn main() -> chns::Result<()> {
    let k: usize = std::env::args().nth(1).map_or(Ok(2), |a| a.parse()).expect("degree");
    let rule = GaussLobattoRule::new(k + 1)?;
    println!("{}-point Gauss-Lobatto rule", rule.len());
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        println!("  x = {x:+.15}  w = {w:.15}");
    }
    println!("monomial exactness (exact integral over [-1, 1]):");
    for p in 0..=2 * k {
        let q: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(p as i32)).sum();
        let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
        let tag = if p < 2 * k { "exact" } else { "beyond 2k-1" };
        println!("  x^{p}: rule {q:+.3e}  error {:+.1e}  ({tag})", q - exact);
    }
    let mesh = GridMesh::unit_square(4, k)?;
    let space = ScalarSpace::new(&mesh)?;
    let total: f64 = space.lumped_weights().iter().sum();
    println!(
        "Q{k} on 4x4 cells: {} nodes, lumped weights sum to {total:.15} (|Omega| = 1)",
        space.dim()
    );
    Ok(())
}
