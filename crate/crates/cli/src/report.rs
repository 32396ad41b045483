//! Machine-readable report assembly and emission.
//!
//! One JSON document per run: the fully resolved config, the results, and a
//! provenance block. Everything outside `provenance.timestamp` is a pure
//! function of config and seed, so reports diff cleanly as fixtures. Curve
//! samples go to separate CSV files on request; a human summary prints to
//! standard output.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use stabcert_core::chain::ConstantsReport;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub results: Results,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Results {
    pub chain: Option<ChainResult>,
    pub optimize: Option<OptimizeResult>,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    /// UTC wall-clock time of report assembly; the one field excluded from
    /// byte-stability guarantees.
    pub timestamp: String,
    pub seed: u64,
}

/// Serialized mirror of the core chain report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub sigma: f64,
    pub eps: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub q: u32,
    pub omega: f64,
    pub omega_over_eps: f64,
    pub theta_sup: f64,
    pub u_eps_max: f64,
    /// Absent when the envelope maximum diverges (the zero-coupling limit).
    pub ftilde_max: Option<f64>,
    pub c_raw: f64,
    pub c_value: f64,
    pub a_tilde: f64,
    pub j_value: f64,
    pub margin: f64,
    pub stable: bool,
    pub alpha_c: Option<f64>,
    pub error_bounds: ErrorBoundsEcho,
    pub overridden: OverriddenEcho,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundsEcho {
    pub omega: f64,
    pub theta_sup: f64,
    pub j_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverriddenEcho {
    pub omega_over_eps: bool,
    pub theta_sup: bool,
    pub j_value: bool,
}

impl From<&ConstantsReport> for ChainResult {
    fn from(r: &ConstantsReport) -> Self {
        Self {
            sigma: r.params.sigma,
            eps: r.params.eps,
            lambda: r.params.lambda,
            alpha: r.params.alpha,
            q: r.params.q,
            omega: r.omega,
            omega_over_eps: r.omega_over_eps,
            theta_sup: r.theta_sup,
            u_eps_max: r.u_eps_max,
            ftilde_max: r.ftilde_max.is_finite().then_some(r.ftilde_max),
            c_raw: r.c_raw,
            c_value: r.c_value,
            a_tilde: r.a_tilde,
            j_value: r.j_value,
            margin: r.margin,
            stable: r.stable,
            alpha_c: r.alpha_c,
            error_bounds: ErrorBoundsEcho {
                omega: r.error_bounds.omega,
                theta_sup: r.error_bounds.theta_sup,
                j_value: r.error_bounds.j_value,
            },
            overridden: OverriddenEcho {
                omega_over_eps: r.override_flags.omega_over_eps,
                theta_sup: r.override_flags.theta_sup,
                j_value: r.override_flags.j_value,
            },
            converged: r.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub start: OptimizePoint,
    pub best: OptimizePoint,
    pub improved: bool,
    pub best_chain: ChainResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizePoint {
    pub sigma: f64,
    pub eps: f64,
    pub lambda: f64,
    pub plateau: f64,
    pub h_exponent: f64,
    pub alpha_c: f64,
}

/// One verification check: measured payload, its tolerance, and a verdict.
/// Informational checks (deliberate expected-fail runs) never affect the
/// exit status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub informational: bool,
    pub details: Value,
}

impl Report {
    pub fn new(config: RunConfig, results: Results) -> Self {
        let timestamp = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .expect("UTC timestamps format");
        let provenance = Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            seed: config.seed,
        };
        Self { config, results, provenance }
    }

    /// Writes `<output_path>.json` and returns the path.
    pub fn write_json(&self) -> Result<PathBuf, CliError> {
        let path = PathBuf::from(format!("{}.json", self.config.output_path));
        let mut body = serde_json::to_string_pretty(self).expect("report serializes");
        body.push('\n');
        std::fs::write(&path, body)
            .map_err(|e| CliError::Config(format!("cannot write '{}': {e}", path.display())))?;
        Ok(path)
    }
}

/// Writes a CSV of equal-length numeric columns under the run's output stem.
pub fn write_csv(
    output_path: &str,
    suffix: &str,
    header: &[&str],
    columns: &[&[f64]],
) -> Result<PathBuf, CliError> {
    assert_eq!(header.len(), columns.len(), "one header per column");
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == rows), "columns of unequal length");
    let mut body = String::new();
    let _ = writeln!(body, "{}", header.join(","));
    for row in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| format!("{}", c[row])).collect();
        let _ = writeln!(body, "{}", line.join(","));
    }
    let path = PathBuf::from(format!("{output_path}.{suffix}.csv"));
    std::fs::write(&path, body)
        .map_err(|e| CliError::Config(format!("cannot write '{}': {e}", path.display())))?;
    Ok(path)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "unbounded".into(), |v| format!("{v:.9}"))
}

/// Chain table on standard output, in the reading order of the certificate:
/// penalty ratio, potential corrections, envelope, ball constant, assembled
/// bound, tail, margin, critical coupling.
pub fn print_chain_summary(r: &ChainResult) {
    let verdict = if r.stable { "stable" } else { "not certified" };
    let tag = |on: bool| if on { "  (override)" } else { "" };
    println!("chain verdict: {verdict}   margin = {:.6e}", r.margin);
    println!("  omega/eps   {:.9}{}", r.omega_over_eps, tag(r.overridden.omega_over_eps));
    println!("  theta_sup   {:.9}{}", r.theta_sup, tag(r.overridden.theta_sup));
    println!("  u_eps_max   {:.9}", r.u_eps_max);
    println!("  ftilde_max  {}", fmt_opt(r.ftilde_max));
    println!("  C           {:.4}  (raw {:.9})", r.c_value, r.c_raw);
    println!("  a_tilde     {:.9}", r.a_tilde);
    println!("  J           {:.9}{}", r.j_value, tag(r.overridden.j_value));
    println!("  margin      {:.9e}", r.margin);
    println!("  alpha_c     {}", fmt_opt(r.alpha_c));
    if !r.converged {
        println!("  warning: tolerance not reached within the evaluation budget");
    }
}

pub fn print_checks_summary(checks: &[CheckOutcome]) {
    for check in checks {
        let mark = match (check.pass, check.informational) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (true, true) => "INFO",
            (false, true) => "INFO (unexpected trend)",
        };
        println!("{mark:>4}  {}", check.name);
    }
    let failed = checks.iter().filter(|c| !c.pass && !c.informational).count();
    println!(
        "checks: {} run, {} failed{}",
        checks.len(),
        failed,
        if failed == 0 { ", all certified properties hold" } else { "" }
    );
}

pub fn print_optimize_summary(o: &OptimizeResult) {
    println!(
        "start  alpha_c = {:.9}  at (sigma, eps, lambda) = ({:.4}, {:.4}, {:.4})",
        o.start.alpha_c, o.start.sigma, o.start.eps, o.start.lambda
    );
    println!(
        "best   alpha_c = {:.9}  at (sigma, eps, lambda) = ({:.4}, {:.4}, {:.4}), plateau {:.4}, weight exponent {:.4}",
        o.best.alpha_c, o.best.sigma, o.best.eps, o.best.lambda, o.best.plateau, o.best.h_exponent
    );
    println!(
        "improvement: {:.2}x{}",
        o.best.alpha_c / o.start.alpha_c,
        if o.improved { "" } else { " (kept the starting point)" }
    );
}
