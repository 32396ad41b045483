//! The scalar certification chain.
//!
//! One cutoff profile induces a localization penalty `Ω`, a potential
//! correction `θ` with its corrected potential `U*ε = ε·1 + θ`, a ball
//! constant `C` dominating `(1-σ)(a·F̃ + U*ε)`, the assembled bound
//! `Ã = Ω/ε + 8.4411 C⁴/(1-σ)`, and an exterior tail integral `J`. Stability
//! at spin count `q` and coupling `α` is certified when
//! `αq(Ã + J) ≤ 1/(2π²)`; the critical coupling is the largest `α` passing.
//!
//! Every coupling-dependent bound is evaluated at the spin-summed coupling
//! `a = qα` with its matched charge `z = 2/(πa)`. Both `C` and `J` are
//! nondecreasing in the coupling, so this keeps each link a valid upper
//! bound, and it makes the critical coupling scale exactly as `1/q`.
//!
//! [`ChainEvaluator`] caches the profile-level quantities (`Ω`, a radial
//! table of `θ`, refined suprema); parameter sweeps and the coupling
//! bisection then cost only cheap 1D quadratures. [`Overrides`] substitute
//! externally certified values for `Ω/ε`, `sup θ`, and `J`; overridden
//! quantities skip their quadratures entirely and are flagged in the report.

use std::f64::consts::{E, PI};

use thiserror::Error;

use crate::cutoff::{CutoffProfile, ProfileError};
use crate::kernel::{self, KernelPoint};
use crate::opt;
use crate::quad::{self, QuadratureConfig, QuadratureResult};
use crate::tolerances::ALPHA_BISECTION_REL;

/// Ceiling of the coupling search; no certification is attempted beyond it.
pub const COUPLING_CAP: f64 = 0.25;

/// Riesz-mean coefficient of the zero-field unit-ball bound `m Λ⁴ R³`.
pub const BALL_RIESZ_COEFFICIENT: f64 = 4.4827;

/// Prefactor of the exterior tail integral `J`.
pub const TAIL_WEIGHT: f64 = 0.0258;

/// Reference operating point for the localization trade-off.
pub const REFERENCE_EPS: f64 = 0.2077;

/// Reference crossover radius of the potential profile.
pub const REFERENCE_LAMBDA: f64 = 0.97;

/// Box size of the pair quadrature for `Ω`; the remainder beyond it is the
/// closed-form plateau tail.
const OMEGA_BOX: f64 = 4.0;

/// Last tabulated radius of the `θ` table; the closing node at 1 is exact.
const THETA_TABLE_END: f64 = 0.999;

/// `1/(2π²)`, the right-hand side of the one-particle stability inequality.
#[must_use]
pub fn stability_threshold() -> f64 {
    0.5 / (PI * PI)
}

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("sigma must lie in (0, 1/3), got {0}")]
    SigmaRange(f64),
    #[error("eps must be positive and finite, got {0}")]
    EpsRange(f64),
    #[error("lambda must lie in (0, 1), got {0}")]
    LambdaRange(f64),
    #[error("alpha must be nonnegative and finite, got {0}")]
    AlphaRange(f64),
    #[error("spin count must be at least 1")]
    SpinCount,
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("params carry sigma {params} but the profile has sigma {profile}")]
    SigmaMismatch { params: f64, profile: f64 },
    #[error("theta table needs at least 200 points, got {0}")]
    TablePoints(usize),
    #[error("refinement tolerance must be positive, got {0}")]
    RefineTol(f64),
    #[error("no coupling in (0, {COUPLING_CAP}] certifies stability")]
    NoCertification,
    #[error("evaluator was built without {0} and no override supplies it")]
    MissingQuantity(&'static str),
}

/// Free parameters of the chain at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Shell width σ ∈ (0, 1/3).
    pub sigma: f64,
    /// Localization trade-off ε > 0.
    pub eps: f64,
    /// Crossover radius λ ∈ (0, 1) of the potential profile.
    pub lambda: f64,
    /// Coupling α ≥ 0; zero is the free-field limit, where the margin equals
    /// the full threshold and the envelope maximum diverges harmlessly.
    pub alpha: f64,
    /// Spin-state count q ≥ 1.
    pub q: u32,
}

impl ChainParams {
    pub fn new(sigma: f64, eps: f64, lambda: f64, alpha: f64, q: u32) -> Result<Self, ChainError> {
        if !(sigma > 0.0 && sigma < 1.0 / 3.0) {
            return Err(ChainError::SigmaRange(sigma));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ChainError::EpsRange(eps));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(ChainError::LambdaRange(lambda));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(ChainError::AlphaRange(alpha));
        }
        if q < 1 {
            return Err(ChainError::SpinCount);
        }
        Ok(Self { sigma, eps, lambda, alpha, q })
    }

    /// The reference operating point `(σ, ε, λ) = (0.3, 0.2077, 0.97)`.
    pub fn reference(alpha: f64, q: u32) -> Result<Self, ChainError> {
        Self::new(0.3, REFERENCE_EPS, REFERENCE_LAMBDA, alpha, q)
    }

    /// Nuclear charge pinned by the constraint `α·z = 2/π`; it is derived,
    /// never free.
    #[must_use]
    pub fn nuclear_charge(&self) -> f64 {
        2.0 / (PI * self.alpha)
    }

    /// Spin-summed coupling `qα`, the coupling at which every
    /// coupling-dependent bound in the chain is evaluated.
    #[must_use]
    pub fn effective_coupling(&self) -> f64 {
        f64::from(self.q) * self.alpha
    }

    /// Charge matched to the spin-summed coupling, `2/(π·qα)`.
    #[must_use]
    pub fn effective_charge(&self) -> f64 {
        2.0 / (PI * self.effective_coupling())
    }
}

/// Externally certified substitutes for the three quadrature-backed
/// quantities. A present value replaces the computed one and is flagged.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub omega_over_eps: Option<f64>,
    pub theta_sup: Option<f64>,
    pub j_value: Option<f64>,
}

impl Overrides {
    #[must_use]
    pub fn none() -> Self {
        Self::default()
    }

    /// The published reference chain's imported values:
    /// `Ω/ε = 0.5571`, `sup θ = 0.5751`, `J = 1.64`.
    #[must_use]
    pub fn published() -> Self {
        Self {
            omega_over_eps: Some(0.5571),
            theta_sup: Some(0.5751),
            j_value: Some(1.64),
        }
    }

    fn flags(&self) -> OverrideFlags {
        OverrideFlags {
            omega_over_eps: self.omega_over_eps.is_some(),
            theta_sup: self.theta_sup.is_some(),
            j_value: self.j_value.is_some(),
        }
    }
}

/// Which report quantities came from overrides rather than quadrature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OverrideFlags {
    pub omega_over_eps: bool,
    pub theta_sup: bool,
    pub j_value: bool,
}

/// Quadrature error bounds per computed quantity; zero for overridden ones.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorBounds {
    pub omega: f64,
    pub theta_sup: f64,
    pub j_value: f64,
}

/// A refined maximum and where it was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Supremum {
    pub argument: f64,
    pub value: f64,
}

/// The full evaluated chain at one parameter point.
///
/// `margin` is evaluated on the conservative side: `Ω` and `J` enter at
/// `value + error_bound` when computed (overrides enter as given). `c_value`
/// is the rounded-up named constant actually used downstream; `c_raw` keeps
/// the unrounded supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub params: ChainParams,
    pub omega: f64,
    pub omega_over_eps: f64,
    pub theta_sup: f64,
    pub u_eps_max: f64,
    pub ftilde_max: f64,
    pub c_raw: f64,
    pub c_value: f64,
    pub a_tilde: f64,
    pub j_value: f64,
    pub margin: f64,
    pub stable: bool,
    /// Largest certified coupling for `params.q`; `None` when no coupling in
    /// `(0, COUPLING_CAP]` certifies.
    pub alpha_c: Option<f64>,
    pub error_bounds: ErrorBounds,
    pub override_flags: OverrideFlags,
    /// False when any backing quadrature exhausted its budget; the values
    /// then carry the best estimates reached.
    pub converged: bool,
}

// ── Closed-form links ───────────────────────────────────────────────────────

/// Scale factor turning a zero-field Riesz coefficient into its magnetic
/// counterpart: `m ↦ 6(e/4)³ m`.
#[must_use]
pub fn transfer_constant(m: f64) -> f64 {
    assert!(m >= 0.0, "Riesz coefficient must be nonnegative, got {m}");
    6.0 * (E / 4.0).powi(3) * m
}

/// Magnetic unit-ball Riesz coefficient: [`transfer_constant`] applied to
/// [`BALL_RIESZ_COEFFICIENT`] and rounded up to the named constant 8.4411.
#[must_use]
pub fn magnetic_ball_coefficient() -> f64 {
    round_up_4(transfer_constant(BALL_RIESZ_COEFFICIENT))
}

/// Pointwise envelope of the heat-to-Riesz conversion at level `Λ`, per unit
/// zero-field coefficient: `(24/e)·e^{tΛ}/t⁴`.
#[must_use]
pub fn transfer_envelope(t: f64, level: f64) -> f64 {
    assert!(t > 0.0, "envelope time must be positive, got {t}");
    assert!(level > 0.0, "level must be positive, got {level}");
    24.0 / E * (t * level).exp() / t.powi(4)
}

/// Numerical minimum of [`transfer_envelope`] over `t`, as `(argmin, value)`.
///
/// The exact minimizer is `t = 4/Λ` with value `transfer_constant(1)·Λ⁴`;
/// the search runs in log-time so the bracket is scale-free.
#[must_use]
pub fn transfer_envelope_minimum(level: f64) -> (f64, f64) {
    assert!(level > 0.0, "level must be positive, got {level}");
    let scale = 4.0 / level;
    let (w, neg) = opt::golden_section_max(
        |w: f64| -transfer_envelope(w.exp(), level),
        (0.05 * scale).ln(),
        (20.0 * scale).ln(),
        1e-10,
    );
    (w.exp(), -neg)
}

/// Rounds up at the fourth decimal: the convention for naming a clean
/// constant above a raw supremum.
#[must_use]
pub fn round_up_4(x: f64) -> f64 {
    (x * 1e4).ceil() / 1e4
}

/// Largest value of the radial potential profile on `[0, 1-σ]`.
///
/// The inner branch `1/(2(1-t²))` increases toward the crossover and the
/// outer branch decays, so the only candidates are the inner value at
/// `min(λ, 1-σ)` and, when the crossover sits inside the window, the outer
/// value just past it.
#[must_use]
pub fn ftilde_max(params: &ChainParams) -> f64 {
    let top = 1.0 - params.sigma;
    let t_inner = params.lambda.min(top);
    let inner = 0.5 / (1.0 - t_inner * t_inner);
    if params.lambda < top {
        let outer = ((2.0 * params.effective_charge()).sqrt() + 0.5) / params.lambda;
        inner.max(outer)
    } else {
        inner
    }
}

/// The named ball constant `C`: `(1-σ)(a·F̃max + U*ε max)` at the spin-summed
/// coupling `a = qα`, rounded up at the fourth decimal.
#[must_use]
pub fn c_constant(params: &ChainParams, ftilde_max: f64, u_max: f64) -> f64 {
    round_up_4(c_raw(params, ftilde_max, u_max))
}

fn c_raw(params: &ChainParams, ftilde_max: f64, u_max: f64) -> f64 {
    // At zero coupling the envelope term vanishes even though the envelope
    // maximum itself diverges like 1/√α; the product limit is exact.
    let a = params.effective_coupling();
    let envelope_term = if a == 0.0 { 0.0 } else { a * ftilde_max };
    (1.0 - params.sigma) * (envelope_term + u_max)
}

/// Assembled bound `Ã = Ω/ε + 8.4411·C⁴/(1-σ)`.
#[must_use]
pub fn a_tilde(omega: f64, eps: f64, c_value: f64, sigma: f64) -> f64 {
    assert!(eps > 0.0, "eps must be positive, got {eps}");
    a_tilde_from_ratio(omega / eps, c_value, sigma)
}

/// Same assembly from the ratio `Ω/ε` directly, so a ratio override enters
/// without a multiply-divide round trip.
fn a_tilde_from_ratio(omega_over_eps: f64, c_value: f64, sigma: f64) -> f64 {
    assert!(sigma < 1.0, "sigma must stay below 1, got {sigma}");
    omega_over_eps + magnetic_ball_coefficient() * c_value.powi(4) / (1.0 - sigma)
}

/// Stability margin `1/(2π²) - αq(Ã + J)`; the chain certifies stability
/// exactly when this is nonnegative.
#[must_use]
pub fn stability_margin(q: u32, alpha: f64, a_tilde: f64, j: f64) -> f64 {
    assert!(q >= 1, "spin count must be at least 1");
    stability_threshold() - alpha * f64::from(q) * (a_tilde + j)
}

// ── Localization penalty Ω ──────────────────────────────────────────────────

/// Squared cutoff gap `(χ₀(r)-χ₀(s))² + (χ₁(r)-χ₁(s))²`, the radial part of
/// the kernel numerator.
fn cutoff_gap_squared(profile: &CutoffProfile, r: f64, s: f64) -> f64 {
    let d0 = profile.chi0(r) - profile.chi0(s);
    let d1 = profile.chi1(r) - profile.chi1(s);
    d0 * d0 + d1 * d1
}

/// Radial density of `Ω = ½ ∬ far² dx dy` with the separation integral in
/// closed form: `Ω = (1/(6π²)) ∬ r s gap²(r,s) [lo⁻⁶ - (r+s)⁻⁶]₊ dr ds`.
///
/// The squared kernel depends on the separation exactly as `d⁻⁸` and the
/// far region starts at `lo = max(σ, |r-s|)`: below σ a nonzero gap forces
/// both points into the unit ball, which is the near region.
fn omega_pair_density(profile: &CutoffProfile, r: f64, s: f64) -> f64 {
    let lo = profile.sigma().max((r - s).abs());
    let hi = r + s;
    if hi <= lo {
        return 0.0;
    }
    let gap = cutoff_gap_squared(profile, r, s);
    r * s * gap * gap * (lo.powi(-6) - hi.powi(-6)) / (6.0 * PI * PI)
}

/// Localization penalty `Ω = ½ ∬ L⁰(x,y)² dx dy`.
///
/// Computed as half the iterated pair reduction over the box plus the
/// closed-form plateau tail beyond it. Inner quadrature errors are folded
/// into the error bound via the uniform per-row tolerance.
#[must_use]
pub fn omega(profile: &CutoffProfile, cfg: &QuadratureConfig) -> QuadratureResult {
    omega_with_box(profile, cfg, OMEGA_BOX)
}

fn omega_with_box(profile: &CutoffProfile, cfg: &QuadratureConfig, box_size: f64) -> QuadratureResult {
    assert!(box_size >= 1.0, "box must cover the unit ball, got {box_size}");
    let sigma = profile.sigma();
    let plateau = profile.plateau();
    let top = profile.support_end();
    // The gap kinks at the ramp edges; the closed-form separation factor
    // kinks where |r-s| crosses σ.
    let edges = [plateau, top];
    let inner_cfg = QuadratureConfig {
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol.max(1e-13),
        max_evaluations: 200_000,
        ..*cfg
    };
    let inner_issues = std::cell::Cell::new(0u64);
    let inner_error = std::cell::Cell::new(0.0f64);
    let inner_evals = std::cell::Cell::new(0u64);
    let row = |r: f64| -> f64 {
        let mut cuts = [r - sigma, r + sigma, edges[0], edges[1]];
        cuts.sort_by(f64::total_cmp);
        let res = quad::integrate_1d_split(
            |s| omega_pair_density(profile, r, s),
            0.0,
            box_size,
            &cuts,
            &inner_cfg,
        );
        if !res.converged {
            inner_issues.set(inner_issues.get() + 1);
        }
        inner_error.set(inner_error.get().max(res.error_bound));
        inner_evals.set(inner_evals.get() + res.evaluations);
        res.value
    };
    let outer_cuts = [
        plateau - sigma,
        plateau,
        plateau + sigma,
        top - sigma,
        top,
        top + sigma,
    ];
    let outer = quad::integrate_1d_split(&row, 0.0, box_size, &outer_cuts, cfg);
    let tail = omega_tail(profile, cfg, box_size);
    // Rows hold a uniform error tolerance, so their contribution to the
    // outer integral is bounded by the box length times the worst row.
    let row_error = box_size * inner_error.get();
    QuadratureResult {
        value: outer.value + tail.value,
        error_bound: outer.error_bound + row_error + tail.error_bound,
        evaluations: outer.evaluations + inner_evals.get() + tail.evaluations,
        converged: outer.converged && inner_issues.get() == 0 && tail.converged,
    }
}

/// Both one-sided tails of the Ω pair integral past the box.
///
/// For `s` beyond the box the outer point sits on the plateau, the numerator
/// collapses to `n(r) = (chi0(r)-1)² + chi1(r)² = 2(1-chi0(r))`, and the `s`-
/// and `d`-integrals of `d⁻⁷` are elementary:
/// `Ω_tail = (1/(3π²)) ∫₀^{1-σ} r·n(r)²·g(S,r) dr` with
/// `g = ¼[(S-r)⁻⁴ - (S+r)⁻⁴] + (r/5)[(S-r)⁻⁵ + (S+r)⁻⁵]`.
fn omega_tail(profile: &CutoffProfile, cfg: &QuadratureConfig, box_size: f64) -> QuadratureResult {
    let top = profile.support_end();
    quad::integrate_1d(
        |r| {
            let n = 2.0 * (1.0 - profile.chi0(r));
            let minus = box_size - r;
            let plus = box_size + r;
            let g = 0.25 * (minus.powi(-4) - plus.powi(-4))
                + 0.2 * r * (minus.powi(-5) + plus.powi(-5));
            r * n * n * g / (3.0 * PI * PI)
        },
        0.0,
        top,
        cfg,
    )
}

// ── Potential correction θ ──────────────────────────────────────────────────

/// Potential correction
/// `θ(x) = h(x)⁻¹ ∫_{|y|<1, |x-y|<σ} L(x,y) h(y) dy`, radial in `|x|`;
/// identically zero from the unit sphere on.
#[must_use]
pub fn theta(x_radius: f64, profile: &CutoffProfile, cfg: &QuadratureConfig) -> QuadratureResult {
    assert!(x_radius >= 0.0, "radius must be nonnegative, got {x_radius}");
    if x_radius >= 1.0 {
        return QuadratureResult { value: 0.0, error_bound: 0.0, evaluations: 0, converged: true };
    }
    let mut res = quad::integrate_ball_relative(
        |d, s| {
            kernel::localization_kernel(KernelPoint::from_separation(x_radius, s, d), profile)
                * profile.weight(s)
        },
        x_radius,
        profile.sigma(),
        cfg,
    );
    let inverse_weight = profile.weight(x_radius).recip();
    res.value *= inverse_weight;
    res.error_bound *= inverse_weight;
    res
}

/// Supremum of `θ` over `[0, 1)` by a 256-point scan with golden-section
/// refinement around the best sample.
#[must_use]
pub fn theta_sup(profile: &CutoffProfile, cfg: &QuadratureConfig) -> Supremum {
    let (argument, value) =
        opt::grid_then_golden_max(|r| theta(r, profile, cfg).value, 0.0, 1.0 - 1e-9, 256);
    Supremum { argument, value }
}

/// Pointwise corrected potential `U*ε = ε·1_{B_{1-σ}} + θ`, supported in the
/// closed unit ball.
///
/// Evaluates `θ` with the default quadrature budget; hot paths go through
/// the evaluator's cached table instead.
#[must_use]
pub fn u_eps_star(x_radius: f64, params: &ChainParams, profile: &CutoffProfile) -> f64 {
    debug_assert_eq!(params.sigma, profile.sigma(), "params and profile disagree on sigma");
    let step = if x_radius < 1.0 - params.sigma { params.eps } else { 0.0 };
    step + theta(x_radius, profile, &QuadratureConfig::default()).value
}

/// Piecewise-linear radial table of `θ` on `[0, 1]`.
///
/// Nodes are uniform on `[0, 0.999]`; the closing node at 1 is the exact
/// zero from the support statement. Linear interpolation never overshoots
/// the sampled values, so table suprema are honest lower bounds of the true
/// supremum up to the grid gap.
#[derive(Debug, Clone)]
pub struct ThetaTable {
    step: f64,
    values: Vec<f64>,
    max_error: f64,
    evaluations: u64,
    converged: bool,
}

impl ThetaTable {
    /// Samples `θ` at `points` uniform radii (at least 200).
    pub fn build(
        profile: &CutoffProfile,
        cfg: &QuadratureConfig,
        points: usize,
    ) -> Result<Self, ChainError> {
        if points < 200 {
            return Err(ChainError::TablePoints(points));
        }
        let step = THETA_TABLE_END / (points - 1) as f64;
        let mut values = Vec::with_capacity(points);
        let mut max_error: f64 = 0.0;
        let mut evaluations = 0;
        let mut converged = true;
        for i in 0..points {
            let r = step * i as f64;
            let res = theta(r, profile, cfg);
            values.push(res.value);
            max_error = max_error.max(res.error_bound);
            evaluations += res.evaluations;
            converged &= res.converged;
        }
        Ok(Self { step, values, max_error, evaluations, converged })
    }

    /// Interpolated `θ(r)`; exact zero from the unit sphere on.
    #[must_use]
    pub fn value(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "radius must be nonnegative, got {r}");
        if r >= 1.0 {
            return 0.0;
        }
        let last = self.values.len() - 1;
        let end = self.step * last as f64;
        if r >= end {
            // Closing segment down to the exact zero at 1.
            let t = (r - end) / (1.0 - end);
            return self.values[last] * (1.0 - t);
        }
        let x = r / self.step;
        let i = (x as usize).min(last - 1);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Node spacing of the uniform grid.
    #[must_use]
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Sampled radii and values, for curve output.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let step = self.step;
        self.values.iter().enumerate().map(move |(i, &v)| (step * i as f64, v))
    }

    /// Largest per-node quadrature error bound.
    #[must_use]
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    /// Total integrand evaluations spent building the table.
    #[must_use]
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    #[must_use]
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Index of the largest node value at radii `<= top`.
    fn best_node(&self, top: f64) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if self.step * i as f64 > top {
                break;
            }
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

// ── Exterior tail integral J ────────────────────────────────────────────────

/// Exterior tail integral
/// `J = 0.0258·4π ∫_{1-3σ}^∞ [2/(πr) + a·F̃(r) + U*ε(r)]⁴ r² dr` at the
/// spin-summed coupling `a = qα`.
///
/// Builds a fresh `θ` table; the evaluator's cached variant is the hot path.
#[must_use]
pub fn j_integral(
    params: &ChainParams,
    profile: &CutoffProfile,
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    debug_assert_eq!(params.sigma, profile.sigma(), "params and profile disagree on sigma");
    let table = ThetaTable::build(profile, cfg, EvalSettings::default().theta_table_points)
        .expect("default table size is valid");
    j_with_table(params, &table, cfg)
}

/// `J` with the bracket stripped to the bare Coulomb term `2/(πr)`.
///
/// Closed form `0.0258·4π·(2/π)⁴ ∫_{1-3σ}^∞ dr/r²`; useful as an exact
/// cross-check of the tail quadrature and remainder handling.
#[must_use]
pub fn j_coulomb_only(sigma: f64, cfg: &QuadratureConfig) -> QuadratureResult {
    j_from_bracket(&|r| 2.0 / (PI * r), sigma, 1.0, cfg)
}

fn j_with_table(params: &ChainParams, table: &ThetaTable, cfg: &QuadratureConfig) -> QuadratureResult {
    let a = params.effective_coupling();
    let z = params.effective_charge();
    let eps_edge = 1.0 - params.sigma;
    let bracket = |r: f64| {
        let step = if r < eps_edge { params.eps } else { 0.0 };
        2.0 / (PI * r) + a * kernel::ftilde(r, z, params.lambda) + step + table.value(r)
    };
    j_from_bracket(&bracket, params.sigma, params.lambda, cfg)
}

/// Shared tail machinery: integrates `w·bracket⁴·r²` from `1-3σ` to the tail
/// start and closes with the exact remainder.
///
/// Past `max(tail_cut, 1, λ)` every bracket term decays exactly like `1/r`,
/// so the remainder is `w·c⁴/T` with `c = bracket(T)·T`.
fn j_from_bracket<F: Fn(f64) -> f64>(
    bracket: &F,
    sigma: f64,
    lambda: f64,
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    let weight = TAIL_WEIGHT * 4.0 * PI;
    let lower = 1.0 - 3.0 * sigma;
    let tail_start = cfg.tail_cut.max(1.0).max(lambda);
    // The bracket jumps where the ε-step ends, at the crossover, and at the
    // support edge of θ.
    let breakpoints = [1.0 - sigma, lambda, 1.0];
    let mut res = quad::integrate_1d_split(
        |r| weight * bracket(r).powi(4) * r * r,
        lower,
        tail_start,
        &breakpoints,
        cfg,
    );
    let envelope = bracket(tail_start) * tail_start;
    res.value += weight * envelope.powi(4) / tail_start;
    res
}

// ── Profile-level evaluator ─────────────────────────────────────────────────

/// Grid densities for the cached table and its refined suprema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    /// Radial nodes of the `θ` table; doubles as the supremum scan grid.
    pub theta_table_points: usize,
    /// Abscissa tolerance of the golden-section supremum refinement.
    pub refine_tol: f64,
}

impl EvalSettings {
    fn validate(&self) -> Result<(), ChainError> {
        if self.theta_table_points < 200 {
            return Err(ChainError::TablePoints(self.theta_table_points));
        }
        if !(self.refine_tol > 0.0) {
            return Err(ChainError::RefineTol(self.refine_tol));
        }
        Ok(())
    }
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { theta_table_points: 512, refine_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
struct ThetaData {
    table: ThetaTable,
    /// Refined over `[0, 1)`.
    sup_global: Supremum,
    /// Refined over `[0, 1-σ]`, the window entering `U*ε`'s supremum.
    sup_ball: Supremum,
    /// Quadrature error bound at the refined peak.
    sup_error: f64,
}

/// Everything the chain needs from one cutoff profile, computed once.
#[derive(Debug, Clone)]
pub struct ChainEvaluator {
    profile: CutoffProfile,
    cfg: QuadratureConfig,
    omega: Option<QuadratureResult>,
    theta: Option<ThetaData>,
}

/// One composed pass through the chain; `evaluate` assembles the report from
/// it and the coupling bisection reads only its margin.
struct Composition {
    omega: f64,
    omega_over_eps: f64,
    theta_sup: f64,
    u_eps_max: f64,
    ftilde_max: f64,
    c_raw: f64,
    c_value: f64,
    a_tilde: f64,
    j_value: f64,
    margin: f64,
    error_bounds: ErrorBounds,
    converged: bool,
}

impl ChainEvaluator {
    /// Computes `Ω` and the `θ` table with default grid densities.
    #[must_use]
    pub fn new(profile: CutoffProfile, cfg: QuadratureConfig) -> Self {
        Self::build(profile, cfg, EvalSettings::default(), true, true)
            .expect("default settings are valid")
    }

    /// As [`ChainEvaluator::new`] with explicit grid densities.
    pub fn with_settings(
        profile: CutoffProfile,
        cfg: QuadratureConfig,
        settings: EvalSettings,
    ) -> Result<Self, ChainError> {
        Self::build(profile, cfg, settings, true, true)
    }

    /// Computes only the pieces the overrides leave open; with all three
    /// present no quadrature runs at all.
    #[must_use]
    pub fn for_overrides(
        profile: CutoffProfile,
        cfg: QuadratureConfig,
        overrides: &Overrides,
    ) -> Self {
        let need_omega = overrides.omega_over_eps.is_none();
        let need_theta = overrides.theta_sup.is_none() || overrides.j_value.is_none();
        Self::build(profile, cfg, EvalSettings::default(), need_omega, need_theta)
            .expect("default settings are valid")
    }

    /// As [`ChainEvaluator::for_overrides`] with explicit grid densities.
    pub fn for_overrides_with_settings(
        profile: CutoffProfile,
        cfg: QuadratureConfig,
        overrides: &Overrides,
        settings: EvalSettings,
    ) -> Result<Self, ChainError> {
        let need_omega = overrides.omega_over_eps.is_none();
        let need_theta = overrides.theta_sup.is_none() || overrides.j_value.is_none();
        Self::build(profile, cfg, settings, need_omega, need_theta)
    }

    fn build(
        profile: CutoffProfile,
        cfg: QuadratureConfig,
        settings: EvalSettings,
        need_omega: bool,
        need_theta: bool,
    ) -> Result<Self, ChainError> {
        settings.validate()?;
        let omega = need_omega.then(|| omega(&profile, &cfg));
        let theta = if need_theta {
            Some(Self::build_theta(&profile, &cfg, &settings)?)
        } else {
            None
        };
        Ok(Self { profile, cfg, omega, theta })
    }

    fn build_theta(
        profile: &CutoffProfile,
        cfg: &QuadratureConfig,
        settings: &EvalSettings,
    ) -> Result<ThetaData, ChainError> {
        let table = ThetaTable::build(profile, cfg, settings.theta_table_points)?;
        let refine = |top: f64| -> Supremum {
            let best = table.best_node(top);
            let lo = table.step * best.saturating_sub(1) as f64;
            let hi = (table.step * (best + 1) as f64).min(top);
            let (argument, value) = opt::golden_section_max(
                |r| theta(r, profile, cfg).value,
                lo,
                hi,
                settings.refine_tol,
            );
            let node = Supremum {
                argument: table.step * best as f64,
                value: table.values[best],
            };
            if value >= node.value { Supremum { argument, value } } else { node }
        };
        let sup_global = refine(THETA_TABLE_END);
        let sup_ball = refine(profile.support_end());
        let sup_error = theta(sup_global.argument, profile, cfg).error_bound;
        Ok(ThetaData { table, sup_global, sup_ball, sup_error })
    }

    #[must_use]
    pub fn profile(&self) -> &CutoffProfile {
        &self.profile
    }

    /// Computed `Ω`, when this evaluator carries it.
    #[must_use]
    pub fn omega(&self) -> Option<QuadratureResult> {
        self.omega
    }

    /// Refined supremum of `θ` over `[0, 1)`, when the table was built.
    #[must_use]
    pub fn theta_sup(&self) -> Option<Supremum> {
        self.theta.as_ref().map(|t| t.sup_global)
    }

    /// Refined supremum of `θ` over `[0, 1-σ]`, when the table was built.
    #[must_use]
    pub fn theta_ball_sup(&self) -> Option<Supremum> {
        self.theta.as_ref().map(|t| t.sup_ball)
    }

    /// The cached radial table, for curve output.
    #[must_use]
    pub fn theta_table(&self) -> Option<&ThetaTable> {
        self.theta.as_ref().map(|t| &t.table)
    }

    fn compose(&self, params: &ChainParams, overrides: &Overrides) -> Result<Composition, ChainError> {
        if params.sigma != self.profile.sigma() {
            return Err(ChainError::SigmaMismatch {
                params: params.sigma,
                profile: self.profile.sigma(),
            });
        }
        let mut error_bounds = ErrorBounds::default();
        let mut converged = true;

        let (omega_value, omega_over_eps) = match overrides.omega_over_eps {
            Some(ratio) => (ratio * params.eps, ratio),
            None => {
                let res = self.omega.ok_or(ChainError::MissingQuantity("omega"))?;
                error_bounds.omega = res.error_bound;
                converged &= res.converged;
                let upper = res.value + res.error_bound;
                (upper, upper / params.eps)
            }
        };

        let (theta_sup_value, ball_sup) = match overrides.theta_sup {
            // An override is an upper bound for the full ball, so it also
            // covers the inner window.
            Some(v) => (v, v),
            None => {
                let data = self.theta.as_ref().ok_or(ChainError::MissingQuantity("theta"))?;
                error_bounds.theta_sup = data.sup_error;
                converged &= data.table.converged;
                (data.sup_global.value, data.sup_ball.value)
            }
        };

        let u_eps_max = params.eps + ball_sup;
        let fmax = ftilde_max(params);
        let c_raw_value = c_raw(params, fmax, u_eps_max);
        let c_value = round_up_4(c_raw_value);
        let a_tilde_value = a_tilde_from_ratio(omega_over_eps, c_value, params.sigma);

        let (j_value, j_upper) = match overrides.j_value {
            Some(v) => (v, v),
            None => {
                let data = self.theta.as_ref().ok_or(ChainError::MissingQuantity("theta"))?;
                let res = j_with_table(params, &data.table, &self.cfg);
                error_bounds.j_value = res.error_bound;
                converged &= res.converged;
                (res.value, res.value + res.error_bound)
            }
        };

        let margin = stability_margin(params.q, params.alpha, a_tilde_value, j_upper);
        Ok(Composition {
            omega: omega_value,
            omega_over_eps,
            theta_sup: theta_sup_value,
            u_eps_max,
            ftilde_max: fmax,
            c_raw: c_raw_value,
            c_value,
            a_tilde: a_tilde_value,
            j_value,
            margin,
            error_bounds,
            converged,
        })
    }

    /// Composes the full chain at `params`, including the critical coupling
    /// for `params.q`.
    pub fn evaluate(
        &self,
        params: &ChainParams,
        overrides: &Overrides,
    ) -> Result<ConstantsReport, ChainError> {
        let c = self.compose(params, overrides)?;
        let alpha_c = match self.critical_coupling(params, overrides) {
            Ok(a) => Some(a),
            Err(ChainError::NoCertification) => None,
            Err(e) => return Err(e),
        };
        Ok(ConstantsReport {
            params: *params,
            omega: c.omega,
            omega_over_eps: c.omega_over_eps,
            theta_sup: c.theta_sup,
            u_eps_max: c.u_eps_max,
            ftilde_max: c.ftilde_max,
            c_raw: c.c_raw,
            c_value: c.c_value,
            a_tilde: c.a_tilde,
            j_value: c.j_value,
            margin: c.margin,
            stable: c.margin >= 0.0,
            alpha_c,
            error_bounds: c.error_bounds,
            override_flags: overrides.flags(),
            converged: c.converged,
        })
    }

    /// Largest coupling in `(0, COUPLING_CAP]` whose margin is nonnegative,
    /// by bisection to relative tolerance `ALPHA_BISECTION_REL`; `base`
    /// supplies everything but the coupling.
    ///
    /// The margin is strictly decreasing in the coupling (every
    /// coupling-dependent term is nondecreasing), so bisection returns the
    /// stable side of the single crossing.
    pub fn critical_coupling(
        &self,
        base: &ChainParams,
        overrides: &Overrides,
    ) -> Result<f64, ChainError> {
        let margin_at = |alpha: f64| -> Result<f64, ChainError> {
            let p = ChainParams { alpha, ..*base };
            Ok(self.compose(&p, overrides)?.margin)
        };
        if margin_at(COUPLING_CAP)? >= 0.0 {
            return Ok(COUPLING_CAP);
        }
        let mut lo = 1e-12;
        if margin_at(lo)? < 0.0 {
            return Err(ChainError::NoCertification);
        }
        let mut hi = COUPLING_CAP;
        while hi - lo > ALPHA_BISECTION_REL * lo {
            let mid = 0.5 * (lo + hi);
            if margin_at(mid)? >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// One-call chain evaluation: builds an evaluator carrying exactly the
/// pieces the overrides leave open, then composes the report.
pub fn evaluate_chain(
    params: &ChainParams,
    profile: &CutoffProfile,
    overrides: &Overrides,
    cfg: &QuadratureConfig,
) -> Result<ConstantsReport, ChainError> {
    ChainEvaluator::for_overrides(*profile, *cfg, overrides).evaluate(params, overrides)
}

/// Critical coupling at the reference trade-off `(ε, λ) = (0.2077, 0.97)`;
/// [`ChainEvaluator::critical_coupling`] gives explicit control.
pub fn solve_alpha_c(
    q: u32,
    profile: &CutoffProfile,
    overrides: &Overrides,
    cfg: &QuadratureConfig,
) -> Result<f64, ChainError> {
    let base = ChainParams::new(profile.sigma(), REFERENCE_EPS, REFERENCE_LAMBDA, 0.01, q)?;
    ChainEvaluator::for_overrides(*profile, *cfg, overrides).critical_coupling(&base, overrides)
}

// ── Parameter optimization ──────────────────────────────────────────────────

/// Search box for `(σ, ε, λ, plateau fraction, weight exponent)`.
const OPT_LO: [f64; 5] = [0.05, 0.02, 0.50, 0.05, 0.35];
const OPT_HI: [f64; 5] = [0.32, 1.50, 0.995, 1.0, 0.75];
const OPT_STEPS: [f64; 5] = [0.02, 0.05, 0.01, 0.08, 0.05];

fn profile_from_coords(x: &[f64]) -> Result<CutoffProfile, ChainError> {
    // The plateau is parametrized as a fraction of its admissible range, so
    // every box point is a valid profile.
    let plateau = x[3] * (1.0 - 2.0 * x[0]);
    Ok(CutoffProfile::new(x[0], plateau, x[4])?)
}

fn coupling_at_coords(
    x: &[f64],
    q: u32,
    cfg: &QuadratureConfig,
    settings: EvalSettings,
    overrides: &Overrides,
) -> Result<f64, ChainError> {
    let profile = profile_from_coords(x)?;
    let base = ChainParams::new(x[0], x[1], x[2], 0.01, q)?;
    let need_omega = overrides.omega_over_eps.is_none();
    let need_theta = overrides.theta_sup.is_none() || overrides.j_value.is_none();
    let evaluator = ChainEvaluator::build(profile, *cfg, settings, need_omega, need_theta)?;
    evaluator.critical_coupling(&base, overrides)
}

/// Simplex search over `(σ, ε, λ, plateau fraction, weight exponent)`
/// maximizing the critical coupling, started at the reference operating
/// point. Deterministic; never returns a worse certified chain than its
/// starting point, because both the start and the simplex winner are
/// re-evaluated at full grid density and the better one wins.
pub fn optimize_parameters(
    q: u32,
    cfg: &QuadratureConfig,
) -> Result<(ChainParams, CutoffProfile, ConstantsReport), ChainError> {
    optimize_parameters_with(q, cfg, &Overrides::none())
}

/// As [`optimize_parameters`], with overrides pinning imported quantities
/// through the whole search.
pub fn optimize_parameters_with(
    q: u32,
    cfg: &QuadratureConfig,
    overrides: &Overrides,
) -> Result<(ChainParams, CutoffProfile, ConstantsReport), ChainError> {
    if q < 1 {
        return Err(ChainError::SpinCount);
    }
    let start = [0.3, REFERENCE_EPS, REFERENCE_LAMBDA, 0.4 / (1.0 - 2.0 * 0.3), 0.5];
    // The search runs on a loosened budget; infeasible points repel the
    // simplex instead of aborting it.
    let search_cfg = QuadratureConfig {
        abs_tol: (cfg.abs_tol * 100.0).min(1e-6),
        rel_tol: (cfg.rel_tol * 100.0).min(1e-6),
        ..*cfg
    };
    let search_settings = EvalSettings { theta_table_points: 256, ..EvalSettings::default() };
    let objective = |x: &[f64]| -> f64 {
        match coupling_at_coords(x, q, &search_cfg, search_settings, overrides) {
            Ok(alpha) => -alpha,
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = opt::nelder_mead_min(objective, &start, &OPT_STEPS, &OPT_LO, &OPT_HI, 1e-9, 40);

    let full = |x: &[f64]| -> Result<(ChainParams, CutoffProfile, ConstantsReport), ChainError> {
        let profile = profile_from_coords(x)?;
        let base = ChainParams::new(x[0], x[1], x[2], 0.01, q)?;
        let need_omega = overrides.omega_over_eps.is_none();
        let need_theta = overrides.theta_sup.is_none() || overrides.j_value.is_none();
        let evaluator =
            ChainEvaluator::build(profile, *cfg, EvalSettings::default(), need_omega, need_theta)?;
        let alpha_c = evaluator.critical_coupling(&base, overrides)?;
        let best = ChainParams { alpha: alpha_c, ..base };
        let report = evaluator.evaluate(&best, overrides)?;
        Ok((best, profile, report))
    };
    let started = full(&start)?;
    let candidate = full(&outcome.x);
    match candidate {
        Ok(found) if found.0.alpha >= started.0.alpha => Ok(found),
        _ => Ok(started),
    }
}

/// One-coordinate trade-off sweep: maximizes the critical coupling over `ε`
/// on `[lo, hi]` at a fixed profile, through the same simplex machinery.
/// Returns `(ε, α_c)` at the maximum.
pub fn sweep_eps(
    evaluator: &ChainEvaluator,
    base: &ChainParams,
    overrides: &Overrides,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64), ChainError> {
    assert!(lo > 0.0 && lo < hi, "bad sweep range [{lo}, {hi}]");
    let objective = |x: &[f64]| -> f64 {
        let p = ChainParams { eps: x[0], ..*base };
        match evaluator.critical_coupling(&p, overrides) {
            Ok(alpha) => -alpha,
            Err(_) => f64::INFINITY,
        }
    };
    let start = base.eps.clamp(lo, hi);
    let outcome = opt::nelder_mead_min(
        objective,
        &[start],
        &[0.1 * (hi - lo)],
        &[lo],
        &[hi],
        1e-12,
        120,
    );
    if !outcome.value.is_finite() {
        return Err(ChainError::NoCertification);
    }
    Ok((outcome.x[0], -outcome.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_profile() -> CutoffProfile {
        CutoffProfile::reference()
    }

    fn published_params(alpha: f64, q: u32) -> ChainParams {
        ChainParams::reference(alpha, q).unwrap()
    }

    #[test]
    fn transfer_constant_matches_closed_form() {
        let unit = transfer_constant(1.0);
        let exact = 6.0 * (E / 4.0).powi(3);
        assert!((unit - exact).abs() < 1e-15);
        assert!((unit - 1.883_019_086_548_843_9).abs() < 1e-14, "got {unit:.16}");
        assert!((unit - 1.88302).abs() < 1e-5);
        assert_eq!(transfer_constant(0.0), 0.0);

        let ball = transfer_constant(BALL_RIESZ_COEFFICIENT);
        assert!((ball - 8.441_009_659_272_502).abs() < 1e-12, "got {ball:.15}");
        assert!((ball - 8.4411).abs() < 5e-4);
        assert_eq!(magnetic_ball_coefficient(), 8.4411);
    }

    #[test]
    fn transfer_envelope_minimum_hits_the_analytic_point() {
        for level in [0.5, 1.0, 4.0] {
            let (t, value) = transfer_envelope_minimum(level);
            let t_exact = 4.0 / level;
            let v_exact = transfer_constant(1.0) * level.powi(4);
            assert!(
                (t - t_exact).abs() < 1e-6 * t_exact,
                "level {level}: argmin {t:.12} vs {t_exact:.12}"
            );
            assert!(
                (value - v_exact).abs() < 1e-9 * v_exact,
                "level {level}: value {value:.12} vs {v_exact:.12}"
            );
        }
        // Λ = 4 explicitly: 6(e/4)³·256.
        let (_, v4) = transfer_envelope_minimum(4.0);
        assert!((v4 - 482.052_886_156_504_03).abs() < 1e-6);
    }

    #[test]
    fn round_up_4_names_clean_upper_bounds() {
        assert_eq!(round_up_4(0.558_282), 0.5583);
        assert_eq!(round_up_4(0.5583), 0.5583);
        assert_eq!(round_up_4(8.441_009_659_272_502), 8.4411);
        assert_eq!(round_up_4(0.0), 0.0);
    }

    #[test]
    fn ftilde_max_dominates_dense_scan() {
        // Reference point: the crossover sits past the window, inner branch
        // only, sup = 1/1.02 at the window edge.
        let p = published_params(1.0 / 66.5, 1);
        let fmax = ftilde_max(&p);
        assert!((fmax - 1.0 / 1.02).abs() < 1e-15, "got {fmax:.16}");

        // Crossover inside the window: the outer branch takes over.
        let q = ChainParams::new(0.3, 0.2077, 0.5, 1.0 / 66.5, 1).unwrap();
        let qmax = ftilde_max(&q);
        let z = q.effective_charge();
        assert!((qmax - ((2.0 * z).sqrt() + 0.5) / 0.5).abs() < 1e-12);

        for params in [&p, &q] {
            let top = 1.0 - params.sigma;
            let m = ftilde_max(params);
            let z = params.effective_charge();
            for i in 0..=20_000 {
                let t = top * i as f64 / 20_000.0;
                let v = kernel::ftilde(t, z, params.lambda);
                assert!(v <= m + 1e-12, "ftilde({t}) = {v} exceeds sup {m}");
            }
        }
    }

    #[test]
    fn chain_reproduces_published_reference_numbers() {
        let params = published_params(1.0 / 66.5, 1);
        let overrides = Overrides::published();
        let evaluator =
            ChainEvaluator::for_overrides(reference_profile(), QuadratureConfig::default(), &overrides);
        // Nothing was computed: all three quantities are overridden.
        assert!(evaluator.omega().is_none());
        assert!(evaluator.theta_sup().is_none());

        let report = evaluator.evaluate(&params, &overrides).unwrap();
        assert!((report.ftilde_max - 0.980_392_156_862_745).abs() < 1e-12);
        assert!((report.u_eps_max - 0.7828).abs() < 1e-12);
        assert!((report.c_raw - 0.558_279_917_440_660_5).abs() < 1e-12);
        assert_eq!(report.c_value, 0.5583);
        assert!((report.a_tilde - 1.728_678_833_096_669_8).abs() < 1e-10);
        assert!((report.a_tilde - 1.7287).abs() < 1e-4);
        assert_eq!(report.j_value, 1.64);
        assert!((report.margin - 3.767_263_324_226_660_5e-6).abs() < 1e-12);
        assert!(report.margin >= 0.0 && report.margin <= 1e-5);
        assert!(report.stable);
        assert!(report.converged);
        assert_eq!(
            report.override_flags,
            OverrideFlags { omega_over_eps: true, theta_sup: true, j_value: true }
        );
        assert_eq!(report.error_bounds, ErrorBounds::default());

        let alpha_c = report.alpha_c.expect("published chain certifies");
        assert!((alpha_c - 0.015_038_712_305_678_294).abs() < 2e-6 * alpha_c);
        let target = 1.0 / 66.5;
        assert!(
            (alpha_c - target).abs() < 2e-3 * target,
            "alpha_c {alpha_c:.9} vs 1/66.5 = {target:.9}"
        );
    }

    #[test]
    fn published_chain_is_borderline_at_one_sixtieth() {
        // Ã and J at their published values: coupling 1/60 overshoots.
        assert!(stability_margin(1, 1.0 / 60.0, 1.7287, 1.64) < 0.0);
        assert!(stability_margin(1, 1.0 / 66.5, 1.7287, 1.64) > 0.0);
        let free = stability_margin(1, f64::MIN_POSITIVE, 0.0, 0.0);
        assert!((free - stability_threshold()).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_certifies_at_the_full_threshold() {
        let params = ChainParams::reference(0.0, 1).unwrap();
        let overrides = Overrides::published();
        let evaluator = ChainEvaluator::for_overrides(
            reference_profile(),
            QuadratureConfig::default(),
            &overrides,
        );
        let report = evaluator.evaluate(&params, &overrides).unwrap();
        assert!(report.stable);
        assert_eq!(report.margin, stability_threshold());
        let u = REFERENCE_EPS + 0.5751;
        assert_eq!(report.c_value, round_up_4(0.7 * u));
        assert!(report.alpha_c.is_some());

        // With the crossover inside the window the envelope maximum diverges
        // in the free limit, while its weighted term drops out of C entirely.
        let crossing = ChainParams::new(0.3, REFERENCE_EPS, 0.5, 0.0, 1).unwrap();
        assert!(ftilde_max(&crossing).is_infinite());
        assert!(c_constant(&crossing, ftilde_max(&crossing), u).is_finite());
    }

    #[test]
    fn critical_coupling_scales_inversely_with_spin_count() {
        let overrides = Overrides::published();
        let cfg = QuadratureConfig::default();
        let profile = reference_profile();
        let single = solve_alpha_c(1, &profile, &overrides, &cfg).unwrap();
        for q in 2..=6u32 {
            let multi = solve_alpha_c(q, &profile, &overrides, &cfg).unwrap();
            let scaled = multi * f64::from(q);
            assert!(
                (scaled - single).abs() < 1e-6 * single,
                "q = {q}: qα = {scaled:.12} vs {single:.12}"
            );
        }
        let two = solve_alpha_c(2, &profile, &overrides, &cfg).unwrap();
        let target = 1.0 / 133.0;
        assert!(
            (two - target).abs() < 2e-3 * target,
            "alpha_c(2) = {two:.9} vs 1/133 = {target:.9}"
        );
    }

    #[test]
    fn coupling_evaluation_point_uses_corrected_window_values() {
        // Same sups at coupling 1/47: the raw constant lands at 0.56256…,
        // the named constant at 0.5626, and the assembly at 1.76519….
        let params = published_params(1.0 / 47.0, 1);
        let fmax = ftilde_max(&params);
        let c = c_constant(&params, fmax, 0.7828);
        let raw = c_raw(&params, fmax, 0.7828);
        assert!((raw - 0.562_561_585_314_977_1).abs() < 1e-12, "raw {raw:.16}");
        assert_eq!(c, 0.5626);
        let at = a_tilde_from_ratio(0.5571, c, 0.3);
        assert!((at - 1.765_191_744_547_897_8).abs() < 1e-10, "a_tilde {at:.16}");
    }

    #[test]
    fn overrides_decouple_the_cutoff_shape() {
        // With all three imports pinned, profile-shape coordinates are dead:
        // the certified coupling depends only on (σ, ε, λ).
        let overrides = Overrides::published();
        let cfg = QuadratureConfig::default();
        let settings = EvalSettings::default();
        let a = coupling_at_coords(&[0.3, 0.2077, 0.97, 0.4 / 0.4, 0.5], 1, &cfg, settings, &overrides);
        let b = coupling_at_coords(&[0.3, 0.2077, 0.97, 0.2, 0.7], 1, &cfg, settings, &overrides);
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn theta_vanishes_outside_the_ball_and_on_the_plateau() {
        let profile = reference_profile();
        let cfg = QuadratureConfig::default();
        for r in [1.0, 1.2, 5.0] {
            let res = theta(r, &profile, &cfg);
            assert_eq!(res.value, 0.0);
            assert_eq!(res.evaluations, 0);
        }
        // Deep inside the plateau the σ-ball never leaves it, the cutoffs
        // are locally constant, and the kernel integrand is exactly zero.
        for r in [0.0, 0.05, 0.1] {
            let res = theta(r, &profile, &cfg);
            assert!(res.value.abs() < 1e-15, "theta({r}) = {:.3e}", res.value);
        }
    }

    /// Dense midpoint oracle for θ in spherical coordinates about the
    /// origin: `2π ∫ s² h(s) [∫ L dw] ds / h(r)` with the angular integral
    /// in closed form. For fixed radii the kernel is `gap²/(2π² d⁴)` and
    /// `d²` is linear in the angle cosine, so the angular integral over the
    /// σ-ball is `gap²/(4π² r s) · (a⁻² - m⁻²)` with `a = |r-s|` and
    /// `m = min(σ, r+s)`; on the diagonal `gap²/a²` tends to the squared
    /// phase rate.
    fn theta_oracle_dense(r: f64, profile: &CutoffProfile, n: usize) -> f64 {
        assert!(r > 0.0 && r < 1.0, "oracle wants an interior radius, got {r}");
        let sigma = profile.sigma();
        let (s_lo, s_hi) = ((r - sigma).max(0.0), (r + sigma).min(1.0));
        let hs = (s_hi - s_lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let s = s_lo + hs * (i as f64 + 0.5);
            let a = (r - s).abs();
            let m = sigma.min(r + s);
            if a >= m {
                continue;
            }
            let gap = cutoff_gap_squared(profile, r, s);
            let gap_over_a2 = if a < 1e-7 {
                let on_ramp = r > profile.plateau() && r < profile.support_end();
                let rate = if on_ramp { profile.lipschitz() } else { 0.0 };
                rate * rate
            } else {
                gap / (a * a)
            };
            let angular = (gap_over_a2 - gap / (m * m)) / (4.0 * PI * PI * r * s);
            total += s * s * profile.weight(s) * angular;
        }
        2.0 * PI * total * hs / profile.weight(r)
    }

    #[test]
    fn theta_matches_dense_grid_oracle_at_the_transition() {
        let profile = reference_profile();
        let cfg = QuadratureConfig::default();
        let engine = theta(0.55, &profile, &cfg);
        let oracle = theta_oracle_dense(0.55, &profile, 4000);
        assert!(engine.converged);
        assert!(
            (engine.value - oracle).abs() < 1e-3 * oracle.abs(),
            "engine {:.8} vs oracle {oracle:.8}",
            engine.value
        );
    }

    #[test]
    fn far_kernel_carries_no_mass_below_the_shell_width() {
        // The support geometry behind Ω's finiteness: within separation σ,
        // either both points sit in the unit ball (near region) or the
        // cutoffs agree and the kernel vanishes.
        let profile = reference_profile();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let r: f64 = rng.gen_range(0.0..3.0);
            let span = profile.sigma() * 0.999;
            let lo = (r - span).max(0.0);
            let s: f64 = rng.gen_range(lo..(r + span));
            let d_lo = (r - s).abs();
            let d = rng.gen_range(d_lo..profile.sigma().min(r + s + 1e-12));
            let split = kernel::kernel_split(KernelPoint::from_separation(r, s, d), &profile);
            assert_eq!(split.far, 0.0, "far mass at r={r}, s={s}, d={d}");
        }
    }

    /// Pair-quadrature oracle for Ω: the generic bipolar integrator over the
    /// squared far kernel, with the separation integrated numerically, plus
    /// the same plateau tail as the engine.
    fn omega_oracle_pair_quadrature(profile: &CutoffProfile, box_size: f64) -> QuadratureResult {
        let cfg = QuadratureConfig { abs_tol: 1e-7, rel_tol: 1e-7, ..Default::default() };
        let mut box_part = quad::integrate_pair_radial(
            |r, s, d| {
                let split = kernel::kernel_split(KernelPoint::from_separation(r, s, d), profile);
                split.far * split.far
            },
            box_size,
            box_size,
            &[profile.sigma()],
            &cfg,
        );
        box_part.value *= 0.5;
        box_part.error_bound *= 0.5;
        let tail = omega_tail(profile, &cfg, box_size);
        QuadratureResult {
            value: box_part.value + tail.value,
            error_bound: box_part.error_bound + tail.error_bound,
            evaluations: box_part.evaluations + tail.evaluations,
            converged: box_part.converged && tail.converged,
        }
    }

    /// Monte Carlo oracle over the same reduction: uniform `(r, s)` on the
    /// two boxes covering the kernel support, `d`-integral closed form.
    /// Returns `(estimate, standard_error)`.
    fn omega_oracle_monte_carlo(profile: &CutoffProfile, samples: u64) -> (f64, f64) {
        let sigma = profile.sigma();
        let top = profile.support_end();
        let wide = 6.0;
        // min(r, s) < 1-σ covers the support; the two boxes tile it.
        let area_a = top * wide;
        let area_b = (wide - top) * top;
        let area = area_a + area_b;
        let g = |r: f64, s: f64| -> f64 {
            let d0 = profile.chi0(r) - profile.chi0(s);
            let d1 = profile.chi1(r) - profile.chi1(s);
            let n = d0 * d0 + d1 * d1;
            let lo = sigma.max((r - s).abs());
            let hi = r + s;
            if hi <= lo {
                return 0.0;
            }
            r * s * n * n * (lo.powi(-6) - hi.powi(-6)) / (6.0 * PI * PI)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let pick_a = rng.gen_range(0.0..area) < area_a;
            let (r, s) = if pick_a {
                (rng.gen_range(0.0..top), rng.gen_range(0.0..wide))
            } else {
                (rng.gen_range(top..wide), rng.gen_range(0.0..top))
            };
            let v = g(r, s);
            sum += v;
            sum_sq += v * v;
        }
        let n = samples as f64;
        let mean = sum / n;
        let variance = (sum_sq / n - mean * mean).max(0.0);
        let tail = {
            let cfg = QuadratureConfig::default();
            omega_tail(profile, &cfg, wide).value
        };
        (area * mean + tail, area * (variance / n).sqrt())
    }

    #[test]
    fn omega_agrees_with_pair_quadrature_and_monte_carlo() {
        let profile = reference_profile();
        let cfg = QuadratureConfig::default();
        let engine = omega(&profile, &cfg);
        assert!(engine.converged, "error bound {:.3e}", engine.error_bound);
        assert!(engine.value > 0.0);

        let oracle = omega_oracle_pair_quadrature(&profile, OMEGA_BOX);
        assert!(
            (engine.value - oracle.value).abs()
                < engine.error_bound + oracle.error_bound + 1e-9,
            "engine {:.10} vs pair quadrature {:.10} ± {:.2e}",
            engine.value,
            oracle.value,
            oracle.error_bound
        );

        let (mc, se) = omega_oracle_monte_carlo(&profile, 10_000_000);
        assert!(
            (engine.value - mc).abs() < 3.0 * se,
            "engine {:.8} vs MC {mc:.8} ± {se:.2e}",
            engine.value
        );
    }

    #[test]
    fn omega_is_invariant_under_box_size_and_tolerance_halving() {
        let profile = reference_profile();
        let cfg = QuadratureConfig::default();
        let at_four = omega_with_box(&profile, &cfg, 4.0);
        let at_three = omega_with_box(&profile, &cfg, 3.0);
        let spread = (at_four.value - at_three.value).abs();
        assert!(
            spread < at_four.error_bound + at_three.error_bound + 1e-9,
            "box split moved Ω by {spread:.3e}"
        );

        let halved = omega(&profile, &cfg.scaled(0.5));
        let drift = (halved.value - at_four.value).abs();
        assert!(drift < 0.01 * at_four.value, "tolerance halving moved Ω by {drift:.3e}");
    }

    #[test]
    fn j_reproduces_the_coulomb_only_closed_form() {
        // Bracket forced to the bare 2/(πr): J = 0.0258·4π·(2/π)⁴·10·σ-free.
        let cfg = QuadratureConfig::default();
        let res = j_coulomb_only(0.3, &cfg);
        let exact = TAIL_WEIGHT * 640.0 / (PI * PI * PI);
        assert!(res.converged);
        assert!(
            (res.value - exact).abs() < 1e-6 * exact,
            "got {:.12}, want {exact:.12}",
            res.value
        );
        assert!((exact - 0.5326).abs() < 1e-3);

        let zero = j_from_bracket(&|_| 0.0, 0.3, REFERENCE_LAMBDA, &cfg);
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn engine_chain_at_the_reference_profile() {
        let profile = reference_profile();
        let cfg = QuadratureConfig::default();
        let evaluator = ChainEvaluator::new(profile, cfg);
        let table = evaluator.theta_table().unwrap();
        assert!(table.converged());

        // Interpolation against direct quadrature at off-grid radii.
        for r in [0.123_456, 0.431_9, 0.55, 0.687_3, 0.801_1, 0.973_2] {
            let direct = theta(r, &profile, &cfg).value;
            let interp = table.value(r);
            assert!(
                (interp - direct).abs() < 5e-4 * direct.abs().max(1e-3),
                "table {interp:.8} vs direct {direct:.8} at r = {r}"
            );
        }

        // Refined suprema dominate a dense scan up to its spacing.
        let sup = evaluator.theta_sup().unwrap();
        let ball = evaluator.theta_ball_sup().unwrap();
        assert!(ball.value <= sup.value + 1e-12);
        let mut scan_best = 0.0f64;
        for i in 0..=400 {
            let r = 0.999 * i as f64 / 400.0;
            scan_best = scan_best.max(theta(r, &profile, &cfg).value);
        }
        assert!(
            sup.value >= scan_best - 1e-6,
            "refined sup {:.8} below scan {scan_best:.8}",
            sup.value
        );

        // Full engine report: internally consistent and conservative.
        let params = published_params(0.01, 1);
        let report = evaluator.evaluate(&params, &Overrides::none()).unwrap();
        assert!(report.converged);
        assert_eq!(report.override_flags, OverrideFlags::default());
        assert!(report.error_bounds.omega > 0.0);
        assert!(report.error_bounds.j_value > 0.0);
        assert!((report.u_eps_max - (params.eps + ball.value)).abs() < 1e-12);
        assert!(report.j_value > 0.0);

        // J is nondecreasing in the coupling.
        let mut last = 0.0;
        for i in 1..=10 {
            let p = published_params(i as f64 * 0.005, 1);
            let j = j_with_table(&p, table, &cfg);
            assert!(j.value >= last - 1e-12, "J dipped at alpha = {}", p.alpha);
            last = j.value;
        }

        // J keeps its value when the quadrature hands more range to the
        // exact envelope tail.
        let p = published_params(1.0 / 66.5, 1);
        let near = j_with_table(&p, table, &QuadratureConfig { tail_cut: 2.0, ..cfg });
        let far = j_with_table(&p, table, &QuadratureConfig { tail_cut: 40.0, ..cfg });
        assert!(
            (near.value - far.value).abs() < 1e-7 * far.value,
            "tail cut moved J: {:.12} vs {:.12}",
            near.value,
            far.value
        );

        // Critical coupling: margin lands in the stable boundary layer and
        // a dense local scan brackets the same crossing.
        let alpha_c = report.alpha_c.expect("reference profile certifies");
        let at_root = evaluator
            .evaluate(&ChainParams { alpha: alpha_c, ..params }, &Overrides::none())
            .unwrap();
        assert!(at_root.stable);
        assert!(at_root.margin <= 1e-5, "margin {:.3e} above the solver layer", at_root.margin);
        let spacing = 1e-3 * alpha_c;
        let mut scan_alpha_c = None;
        let mut probe = alpha_c - 20.0 * spacing;
        while probe <= alpha_c + 20.0 * spacing {
            let p = ChainParams { alpha: probe, ..params };
            if evaluator.compose(&p, &Overrides::none()).unwrap().margin >= 0.0 {
                scan_alpha_c = Some(probe);
            }
            probe += spacing;
        }
        let scan = scan_alpha_c.expect("scan window contains stable couplings");
        assert!(
            (scan - alpha_c).abs() <= spacing + 1e-12,
            "bisection {alpha_c:.8} vs scan {scan:.8}"
        );
    }

    #[test]
    fn evaluator_rejects_mismatched_sigma() {
        let overrides = Overrides::published();
        let evaluator = ChainEvaluator::for_overrides(
            reference_profile(),
            QuadratureConfig::default(),
            &overrides,
        );
        let params = ChainParams::new(0.25, 0.2, 0.9, 0.01, 1).unwrap();
        assert!(matches!(
            evaluator.evaluate(&params, &overrides),
            Err(ChainError::SigmaMismatch { .. })
        ));
    }

    #[test]
    fn settings_and_params_validation() {
        assert!(matches!(
            ChainParams::new(0.4, 0.2, 0.9, 0.01, 1),
            Err(ChainError::SigmaRange(_))
        ));
        assert!(matches!(
            ChainParams::new(0.3, 0.0, 0.9, 0.01, 1),
            Err(ChainError::EpsRange(_))
        ));
        assert!(matches!(
            ChainParams::new(0.3, 0.2, 1.0, 0.01, 1),
            Err(ChainError::LambdaRange(_))
        ));
        assert!(matches!(
            ChainParams::new(0.3, 0.2, 0.9, -0.01, 1),
            Err(ChainError::AlphaRange(_))
        ));
        assert!(ChainParams::new(0.3, 0.2, 0.9, 0.0, 1).is_ok());
        assert!(matches!(ChainParams::new(0.3, 0.2, 0.9, 0.01, 0), Err(ChainError::SpinCount)));
        assert!(matches!(
            ThetaTable::build(&reference_profile(), &QuadratureConfig::default(), 10),
            Err(ChainError::TablePoints(10))
        ));
        assert!(EvalSettings { theta_table_points: 512, refine_tol: 0.0 }.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_up_4_is_a_tight_monotone_upper_bound(
            x in 0.0f64..100.0,
            y in 0.0f64..100.0,
        ) {
            let rx = round_up_4(x);
            prop_assert!(rx >= x);
            prop_assert!(rx - x < 1e-4 + 1e-12);
            if x <= y {
                prop_assert!(rx <= round_up_4(y));
            }
        }

        #[test]
        fn transfer_constant_is_linear(m in 0.0f64..50.0, k in 0.0f64..10.0) {
            let lhs = transfer_constant(k * m);
            let rhs = k * transfer_constant(m);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn ftilde_max_dominates_the_window(
            sigma in 0.05f64..0.32,
            lambda in 0.5f64..0.99,
            alpha in 1e-3f64..0.2,
            frac in 0.0f64..=1.0,
        ) {
            let params = ChainParams::new(sigma, 0.2, lambda, alpha, 1).unwrap();
            let t = frac * (1.0 - sigma);
            let v = kernel::ftilde(t, params.effective_charge(), lambda);
            prop_assert!(v <= ftilde_max(&params) + 1e-12);
        }

        #[test]
        fn margin_sign_matches_the_inequality(
            alpha in 1e-4f64..0.1,
            a_tilde in 0.1f64..5.0,
            j in 0.0f64..5.0,
            q in 1u32..4,
        ) {
            let m = stability_margin(q, alpha, a_tilde, j);
            let holds = alpha * f64::from(q) * (a_tilde + j) <= stability_threshold();
            prop_assert_eq!(m >= 0.0, holds);
        }
    }
}
