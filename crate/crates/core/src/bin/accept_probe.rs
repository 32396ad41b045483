//! Temporary probe: dense-grid θ oracle resolution study.

use stabcert_core::chain;
use stabcert_core::cutoff::CutoffProfile;
use stabcert_core::quad::QuadratureConfig;

fn main() {
    let profile = CutoffProfile::reference();
    let cfg = QuadratureConfig::default();
    let sup = chain::theta_sup(&profile, &cfg);
    println!("engine sup: {:.10} at r = {:.8}", sup.value, sup.argument);
    let top = profile.support_end();
    println!("support end: {top:.6}");
    for points in [500usize, 1000, 2000] {
        let mut best = (0.0f64, 0.0f64);
        for i in 1..=points {
            let r = top * i as f64 / points as f64;
            let v = chain::theta(r, &profile, &cfg).value;
            if v > best.0 {
                best = (v, r);
            }
        }
        println!(
            "grid {points:>5}: max {:.10} at r = {:.6}  rel gap {:.2e}",
            best.0,
            best.1,
            (sup.value - best.0) / sup.value
        );
    }
    for dr in [-0.002, -0.001, 0.0, 0.001, 0.002] {
        let r = sup.argument + dr;
        println!("theta({r:.6}) = {:.10}", chain::theta(r, &profile, &cfg).value);
    }
}
