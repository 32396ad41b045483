//! Pins the mean of 1/|x| over the unit cube cornered at the origin.

use stabcert_core::quad::{self, QuadratureConfig};

fn main() {
    let cfg = QuadratureConfig { abs_tol: 1e-12, rel_tol: 1e-12, ..Default::default() };
    // Innermost axis is elementary: ∫₀¹ dz/√(ρ²+z²) = asinh(1/ρ).
    let inner = |x: f64| {
        quad::integrate_1d(|y| (1.0 / (x * x + y * y).sqrt()).asinh(), 0.0, 1.0, &cfg)
    };
    let outer = quad::integrate_1d(|x| inner(x).value, 0.0, 1.0, &cfg);
    println!("corner-cell mean = {:.15}  err {:.2e}  converged {}", outer.value, outer.error_bound, outer.converged);

    // Midpoint cross-check on a 600³ grid.
    let n = 600;
    let h = 1.0 / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let x = h * (i as f64 + 0.5);
        for j in 0..n {
            let y = h * (j as f64 + 0.5);
            for k in 0..n {
                let z = h * (k as f64 + 0.5);
                total += 1.0 / (x * x + y * y + z * z).sqrt();
            }
        }
    }
    println!("midpoint 600^3   = {:.15}", total * h * h * h);
}
