//! Radial localization cutoffs and the singular radial weight.
//!
//! A profile carries the smooth partition of unity `chi1² + chi0² = 1` on
//! `[0, ∞)`: `chi1` holds a plateau at 1 out to `plateau`, falls along a
//! cosine arc, and vanishes from `1 - sigma` on; `chi0` is the complementary
//! sine arc. Both are Lipschitz with the shared phase rate `π / (2(1 - sigma
//! - plateau))`, which is the constant entering every near-diagonal kernel
//! bound.

use thiserror::Error;

use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("sigma must lie in (0, 1/3), got {0}")]
    SigmaRange(f64),
    #[error("plateau must lie in [0, 1 - 2 sigma] = [0, {max}], got {got}")]
    PlateauRange { got: f64, max: f64 },
    #[error("h exponent must lie in [0, 1), got {0}")]
    ExponentRange(f64),
}

/// Shell width, cutoff plateau, and weight exponent for one localization setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    sigma: f64,
    plateau: f64,
    h_exponent: f64,
}

impl CutoffProfile {
    /// Validates `0 < sigma < 1/3`, `0 <= plateau <= 1 - 2 sigma`,
    /// `0 <= h_exponent < 1`.
    pub fn new(sigma: f64, plateau: f64, h_exponent: f64) -> Result<Self, ProfileError> {
        if !(sigma > 0.0 && sigma < 1.0 / 3.0) {
            return Err(ProfileError::SigmaRange(sigma));
        }
        let max_plateau = 1.0 - 2.0 * sigma;
        if !(0.0..=max_plateau).contains(&plateau) {
            return Err(ProfileError::PlateauRange { got: plateau, max: max_plateau });
        }
        if !(0.0..1.0).contains(&h_exponent) {
            return Err(ProfileError::ExponentRange(h_exponent));
        }
        Ok(Self { sigma, plateau, h_exponent })
    }

    /// Profile with the default plateau `1 - 2 sigma` and weight exponent 1/2.
    pub fn with_defaults(sigma: f64) -> Result<Self, ProfileError> {
        Self::new(sigma, 1.0 - 2.0 * sigma, 0.5)
    }

    /// The published reference configuration: `sigma = 0.3`, plateau 0.4,
    /// weight exponent 1/2.
    pub fn reference() -> Self {
        Self::with_defaults(0.3).expect("reference parameters are in range")
    }

    #[must_use]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[must_use]
    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    #[must_use]
    pub fn h_exponent(&self) -> f64 {
        self.h_exponent
    }

    /// End of the cosine transition; `chi1` vanishes from here on.
    #[must_use]
    pub fn support_end(&self) -> f64 {
        1.0 - self.sigma
    }

    /// Phase of the transition arc, clamped to `[0, π/2]`.
    fn phase(&self, t: f64) -> f64 {
        if t <= self.plateau {
            return 0.0;
        }
        let span = self.support_end() - self.plateau;
        let p = FRAC_PI_2 * (t - self.plateau) / span;
        p.min(FRAC_PI_2)
    }

    /// Inner cutoff: 1 on `[0, plateau]`, cosine arc on the transition, 0
    /// beyond `1 - sigma`.
    #[must_use]
    pub fn chi1(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0, "radius must be nonnegative");
        self.phase(t).cos()
    }

    /// Outer cutoff `sqrt(1 - chi1²)`, realized as the complementary sine arc
    /// so the partition of unity holds without cancellation.
    #[must_use]
    pub fn chi0(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0, "radius must be nonnegative");
        self.phase(t).sin()
    }

    /// Radial weight `(1 - t²)^(-h_exponent)`, defined for `t < 1`.
    #[must_use]
    pub fn weight(&self, t: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&t), "weight is only defined on [0, 1)");
        (1.0 - t * t).powf(-self.h_exponent)
    }

    /// Shared Lipschitz bound `π / (2(1 - sigma - plateau))` for both cutoffs.
    ///
    /// The phase rate also controls the quadratic cancellation
    /// `(chi0(t)-chi0(s))² + (chi1(t)-chi1(s))² <= lipschitz()²·(t-s)²`.
    #[must_use]
    pub fn lipschitz(&self) -> f64 {
        FRAC_PI_2 / (self.support_end() - self.plateau)
    }
}
