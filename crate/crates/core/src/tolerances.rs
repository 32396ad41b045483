//! Numerical tolerances shared across the continuum and lattice halves.
//!
//! Every constant states what failure it guards against; check routines take
//! these as defaults so a tolerance change happens in one place.

/// Eigenvalues of a positive-semidefinite kinetic matrix below this fraction
/// of the spectral norm are treated as exact zeros before taking the
/// operator square root. The discrete Laplacian's zero modes come out of the
/// solver at `~1e-12 * ||L||`, and the square root would amplify that noise
/// to `~1e-6`.
pub const SPECTRAL_CLAMP_REL: f64 = 1e-9;

/// Two gauge-equivalent kinetic operators must have coinciding spectra to
/// this relative precision (measured against the spectral norm).
pub const GAUGE_INVARIANCE_REL: f64 = 1e-10;

/// The localization identity is algebraic, so its residual is pure roundoff;
/// entries are compared absolutely after normalizing by the operator norm.
pub const IMS_IDENTITY_ABS: f64 = 1e-11;

/// Heat traces with and without a magnetic field satisfy a one-sided
/// inequality exactly; the slack absorbs roundoff in the trace sums.
pub const DIAMAGNETIC_TRACE_REL: f64 = 1e-10;

/// Entrywise heat-kernel domination holds exactly in exact arithmetic;
/// violations are measured relative to the largest matrix entry.
pub const DIAMAGNETIC_ENTRY_REL: f64 = 1e-10;

/// The scalar form of the eigenvalue-transfer bound has a closed-form
/// optimum; the measured quotient must match it to this relative precision.
pub const TRANSFER_SCALAR_REL: f64 = 1e-6;

/// Operator-level transfer is checked with the measured spectral supremum
/// in place of the analytic one; the slack covers the supremum's grid error.
pub const TRANSFER_OPERATOR_SLACK: f64 = 1.02;

/// Lattice localization error vs. the integrated continuum bound; covers
/// discretization error at the resolutions we can afford.
pub const LOCALIZATION_SLACK: f64 = 1.02;

/// Eigenvalue-counting bound slack for finite-volume effects.
pub const COUNTING_SLACK: f64 = 1.05;

/// Default quadrature tolerances for chain constants. The acceptance margins
/// sit at `1e-4` and above, three orders looser than this.
pub const CHAIN_ABS_TOL: f64 = 1e-9;
pub const CHAIN_REL_TOL: f64 = 1e-9;

/// Relative bisection width at which the critical-coupling search stops.
pub const ALPHA_BISECTION_REL: f64 = 1e-6;
