//! Cost probe for the chain's heavy paths: Ω, the evaluator build, the
//! coupling bisection, and the parameter search.

use std::time::Instant;

use stabcert_core::chain::{self, ChainParams, Overrides};
use stabcert_core::cutoff::CutoffProfile;
use stabcert_core::quad::QuadratureConfig;

fn main() {
    let profile = CutoffProfile::reference();
    let cfg = QuadratureConfig::default();

    let t0 = Instant::now();
    let res = chain::omega(&profile, &cfg);
    println!("omega       = {:.12} err {:.2e} ({:.2?})", res.value, res.error_bound, t0.elapsed());

    let t0 = Instant::now();
    let evaluator = chain::ChainEvaluator::new(profile, cfg);
    println!("evaluator build ({:.2?})", t0.elapsed());
    println!("theta sup   = {:?}", evaluator.theta_sup().unwrap());
    println!("ball sup    = {:?}", evaluator.theta_ball_sup().unwrap());

    let base = ChainParams::reference(0.01, 1).unwrap();
    let t0 = Instant::now();
    let alpha_c = evaluator.critical_coupling(&base, &Overrides::none()).unwrap();
    println!("alpha_c     = {alpha_c:.9} ({:.2?})", t0.elapsed());

    let t0 = Instant::now();
    let report = evaluator.evaluate(&ChainParams { alpha: alpha_c, ..base }, &Overrides::none()).unwrap();
    println!(
        "report: omega/eps {:.4} theta_sup {:.4} u_max {:.4} C {:.4} A~ {:.4} J {:.4} margin {:.3e} ({:.2?})",
        report.omega_over_eps,
        report.theta_sup,
        report.u_eps_max,
        report.c_value,
        report.a_tilde,
        report.j_value,
        report.margin,
        t0.elapsed()
    );

    let t0 = Instant::now();
    let (eps_best, alpha_best) = chain::sweep_eps(&evaluator, &base, &Overrides::none(), 0.05, 1.5).unwrap();
    println!("eps sweep   = ({eps_best:.4}, {alpha_best:.9}) ({:.2?})", t0.elapsed());

    let t0 = Instant::now();
    let (params, prof, rep) = chain::optimize_parameters(1, &cfg).unwrap();
    println!(
        "optimize    = sigma {:.4} eps {:.4} lambda {:.4} plateau {:.4} a {:.4} alpha_c {:.9} margin {:.3e} ({:.2?})",
        params.sigma,
        params.eps,
        params.lambda,
        prof.plateau(),
        prof.h_exponent(),
        rep.alpha_c.unwrap_or(f64::NAN),
        rep.margin,
        t0.elapsed()
    );
}
