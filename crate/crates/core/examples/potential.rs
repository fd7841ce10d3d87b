//! Flory-Huggins potential, its convex-concave split and the secant quotient.

use chns::potential::{convex_force, free_energy, secant_quotient, SECANT_THRESHOLD};

fn main() -> chns::Result<()> {
    let theta_c = 2.0;
    println!("{:>6} {:>12} {:>12}", "phi", "F(phi)", "f_v(phi)");
    for phi in [-0.99, -0.9, -0.5, 0.0, 0.5, 0.9, 0.99] {
        println!("{phi:>6} {:>12.6} {:>12.6}", free_energy(phi, theta_c)?, convex_force(phi)?);
    }
    let (a, b) = (0.3, 0.7);
    println!("G({a}, {b}) = {:.12}", secant_quotient(a, b, SECANT_THRESHOLD)?);
    println!("G({a}, {a}) = {:.12} = f_v({a})", secant_quotient(a, a, SECANT_THRESHOLD)?);
    match free_energy(1.0, theta_c) {
        Err(e) => println!("F(1): {e}"),
        Ok(v) => println!("F(1) = {v}"),
    }
    Ok(())
}
