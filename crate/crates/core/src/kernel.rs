//! Pointwise kernels: the localization error kernel and its near/far split,
//! the free relativistic heat kernel, the subordination weight, and the
//! effective radial potential profile.
//!
//! All geometry is radial. A pair of points enters through the radii
//! `(r, s)` and the cosine `u` of the angle between them; every kernel here
//! depends on the pair only through `(r, s, |x - y|)`.

use crate::cutoff::CutoffProfile;

use std::f64::consts::PI;

/// Distances below this floor take the capped near-diagonal kernel value.
/// Quadrature cells are never subdivided to sample closer than this.
pub const DIAGONAL_FLOOR: f64 = 1e-8;

/// A pair of radii and their separation `|x - y|`.
///
/// The separation is stored directly: recovering it from the enclosed-angle
/// cosine loses every significant digit near the diagonal, exactly where the
/// kernels are most sensitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub r: f64,
    pub s: f64,
    d: f64,
}

impl KernelPoint {
    /// From radii and the cosine `u` of the enclosed angle; the separation is
    /// computed in the cancellation-free form `sqrt((r-s)² + 2rs(1-u))`.
    pub fn new(r: f64, s: f64, u: f64) -> Self {
        debug_assert!(r >= 0.0 && s >= 0.0, "radii must be nonnegative");
        debug_assert!((-1.0..=1.0).contains(&u), "cosine out of range: {u}");
        let dr = r - s;
        let d = (dr * dr + 2.0 * r * s * (1.0 - u)).max(0.0).sqrt();
        Self { r, s, d }
    }

    /// From radii and the separation itself (bipolar coordinates).
    pub fn from_separation(r: f64, s: f64, d: f64) -> Self {
        debug_assert!(r >= 0.0 && s >= 0.0, "radii must be nonnegative");
        debug_assert!(
            d >= (r - s).abs() * (1.0 - 1e-12) && d <= (r + s) * (1.0 + 1e-12) + 1e-300,
            "separation {d} violates the triangle range [{}, {}]",
            (r - s).abs(),
            r + s
        );
        Self { r, s, d }
    }

    /// `|x - y|`.
    #[must_use]
    pub fn distance(&self) -> f64 {
        self.d
    }
}

/// Near and far parts of the localization kernel; they sum to the full
/// kernel exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSplit {
    /// Both points inside the unit ball and closer than the shell width.
    pub near: f64,
    /// Everything else.
    pub far: f64,
}

/// Localization error kernel
/// `L(x, y) = [(chi0(r)-chi0(s))² + (chi1(r)-chi1(s))²] / (2π²|x-y|⁴)`.
///
/// Below [`DIAGONAL_FLOOR`] the value is capped at the Lipschitz limsup bound
/// `lipschitz² / (2π² · DIAGONAL_FLOOR²)`, which dominates the kernel there
/// because the squared cutoff differences cancel quadratically.
#[must_use]
pub fn localization_kernel(point: KernelPoint, profile: &CutoffProfile) -> f64 {
    let d = point.distance();
    if d < DIAGONAL_FLOOR {
        let lip = profile.lipschitz();
        return lip * lip / (2.0 * PI * PI * DIAGONAL_FLOOR * DIAGONAL_FLOOR);
    }
    let d0 = profile.chi0(point.r) - profile.chi0(point.s);
    let d1 = profile.chi1(point.r) - profile.chi1(point.s);
    let numerator = d0 * d0 + d1 * d1;
    numerator / (2.0 * PI * PI * d.powi(4))
}

/// Splits the localization kernel into the near part (both radii inside the
/// unit ball, separation below the shell width) and the far remainder.
#[must_use]
pub fn kernel_split(point: KernelPoint, profile: &CutoffProfile) -> KernelSplit {
    let full = localization_kernel(point, profile);
    let is_near =
        point.r < 1.0 && point.s < 1.0 && point.distance() < profile.sigma();
    if is_near {
        KernelSplit { near: full, far: 0.0 }
    } else {
        KernelSplit { near: 0.0, far: full }
    }
}

/// Free relativistic heat kernel `exp(-t|p|)(x, y) = t / (π²(d² + t²)²)`
/// at separation `d = |x - y|`.
#[must_use]
pub fn heat_kernel_free(t: f64, d: f64) -> f64 {
    assert!(t > 0.0, "heat kernel time must be positive, got {t}");
    let q = d * d + t * t;
    t / (PI * PI * q * q)
}

/// Integrand of the subordination identity
/// `exp(-|ξ|) = ∫₀^∞ exp(-t - ξ²/(4t)) dt / sqrt(πt)`.
///
/// Integrating this weight over `t ∈ (0, ∞)` at fixed `xi` recovers
/// `exp(-xi)`; it is the bridge from Gaussian semigroup kernels to
/// [`heat_kernel_free`].
#[must_use]
pub fn subordination_weight(t: f64, xi: f64) -> f64 {
    assert!(t > 0.0, "subordination time must be positive, got {t}");
    debug_assert!(xi >= 0.0, "frequency modulus must be nonnegative");
    (-t - xi * xi / (4.0 * t)).exp() / (PI * t).sqrt()
}

/// Effective radial potential profile:
/// `1 / (2(1 - t²))` for `t <= lambda`, `(sqrt(2z) + 1/2) / t` beyond.
///
/// The branch switch at `lambda` is a genuine jump and is kept as such; the
/// `lambda < 1` requirement keeps the inner branch away from its pole.
#[must_use]
pub fn ftilde(t: f64, z: f64, lambda: f64) -> f64 {
    assert!(t >= 0.0, "radius must be nonnegative, got {t}");
    assert!(z > 0.0, "z must be positive, got {z}");
    assert!(
        lambda > 0.0 && lambda < 1.0,
        "lambda must lie in (0, 1), got {lambda}"
    );
    if t <= lambda {
        0.5 / (1.0 - t * t)
    } else {
        ((2.0 * z).sqrt() + 0.5) / t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> CutoffProfile {
        CutoffProfile::reference()
    }

    /// Direct Cartesian evaluation: places x on the z-axis and y in the
    /// xz-plane, then applies the kernel definition verbatim.
    fn cartesian_kernel_oracle(r: f64, s: f64, u: f64, profile: &CutoffProfile) -> f64 {
        let x = [0.0, 0.0, r];
        let sin = (1.0 - u * u).max(0.0).sqrt();
        let y = [s * sin, 0.0, s * u];
        let d2: f64 = (0..3).map(|i| (x[i] - y[i]) * (x[i] - y[i])).sum();
        let d = d2.sqrt();
        if d < DIAGONAL_FLOOR {
            let lip = profile.lipschitz();
            return lip * lip / (2.0 * PI * PI * DIAGONAL_FLOOR * DIAGONAL_FLOOR);
        }
        let rx = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let ry = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let n0 = profile.chi0(rx) - profile.chi0(ry);
        let n1 = profile.chi1(rx) - profile.chi1(ry);
        (n0 * n0 + n1 * n1) / (2.0 * PI * PI * d2 * d2)
    }

    #[test]
    fn kernel_matches_cartesian_oracle_at_aligned_pair() {
        let p = reference();
        let got = localization_kernel(KernelPoint::new(0.2, 0.9, 1.0), &p);
        // chi1: 1 -> 0 and chi0: 0 -> 1 across the pair, distance 0.7.
        let expected = 2.0 / (2.0 * PI * PI * 0.7f64.powi(4));
        assert!(
            (got - expected).abs() < 1e-15 * expected,
            "kernel {got:.15} vs closed form {expected:.15}"
        );
        let oracle = cartesian_kernel_oracle(0.2, 0.9, 1.0, &p);
        assert!((got - oracle).abs() < 1e-13 * expected);
    }

    #[test]
    fn coincident_points_take_the_capped_value() {
        let p = reference();
        let got = localization_kernel(KernelPoint::new(0.55, 0.55, 1.0), &p);
        let lip = p.lipschitz();
        let expected = lip * lip / (2.0 * PI * PI * DIAGONAL_FLOOR * DIAGONAL_FLOOR);
        assert_eq!(got, expected);
    }

    #[test]
    fn equal_radii_separated_points_give_zero() {
        // Radial cutoffs agree at equal radii, so the numerator vanishes.
        let p = reference();
        let got = localization_kernel(KernelPoint::new(0.55, 0.55, -0.2), &p);
        assert_eq!(got, 0.0);
    }

    #[test]
    fn split_parts_lie_in_the_right_regions() {
        let p = reference();
        // Near: both inside the ball, separation 0.15 < sigma.
        let near_pt = KernelPoint::new(0.5, 0.65, 1.0);
        let sp = kernel_split(near_pt, &p);
        assert!(sp.near > 0.0 && sp.far == 0.0);
        // Far: same radii but antipodal, separation 1.15 > sigma.
        let far_pt = KernelPoint::new(0.5, 0.65, -1.0);
        let sp = kernel_split(far_pt, &p);
        assert!(sp.near == 0.0 && sp.far > 0.0);
    }

    #[test]
    fn heat_kernel_reference_value_and_monotonicity() {
        let got = heat_kernel_free(1.0, 1.0);
        let expected = 1.0 / (4.0 * PI * PI);
        assert!((got - expected).abs() < 1e-16);
        assert!(heat_kernel_free(1.0, 0.5) > heat_kernel_free(1.0, 0.6));
    }

    #[test]
    #[should_panic(expected = "heat kernel time must be positive")]
    fn heat_kernel_rejects_nonpositive_time() {
        let _ = heat_kernel_free(0.0, 1.0);
    }

    #[test]
    fn ftilde_branches_and_jump() {
        // Inner branch at the published evaluation point.
        let inner = ftilde(0.7, 84.0, 0.97);
        assert!((inner - 1.0 / 1.02).abs() < 1e-15, "inner branch {inner:.15}");
        assert_eq!(ftilde(0.0, 84.0, 0.97), 0.5);
        // Outer branch.
        let outer = ftilde(2.0, 87.19, 0.97);
        let expected = ((2.0 * 87.19f64).sqrt() + 0.5) / 2.0;
        assert!((outer - expected).abs() < 1e-15);
        // The switch at lambda is a jump, not a crossing.
        let below = ftilde(0.97, 84.0, 0.97);
        let above = ftilde(0.97 + 1e-12, 84.0, 0.97);
        assert!((below - 0.5 / (1.0 - 0.97f64 * 0.97)).abs() < 1e-15);
        assert!((above - ((2.0 * 84.0f64).sqrt() + 0.5) / 0.97).abs() < 1e-10);
        assert!((above - below).abs() > 1.0, "branch jump should be O(sqrt(z))");
    }

    #[test]
    #[should_panic(expected = "lambda must lie in (0, 1)")]
    fn ftilde_rejects_lambda_at_one() {
        let _ = ftilde(1.0, 84.0, 1.0);
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_in_the_radii(
            r in 0.0f64..2.0,
            s in 0.0f64..2.0,
            u in -1.0f64..=1.0,
        ) {
            let p = reference();
            let a = localization_kernel(KernelPoint::new(r, s, u), &p);
            let b = localization_kernel(KernelPoint::new(s, r, u), &p);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn kernel_matches_cartesian_oracle(
            r in 0.0f64..1.8,
            s in 0.0f64..1.8,
            u in -1.0f64..=1.0,
        ) {
            let p = reference();
            let got = localization_kernel(KernelPoint::new(r, s, u), &p);
            let oracle = cartesian_kernel_oracle(r, s, u, &p);
            let scale = got.abs().max(oracle.abs()).max(1e-300);
            prop_assert!(
                (got - oracle).abs() <= 1e-9 * scale,
                "kernel {got:.15e} vs oracle {oracle:.15e}"
            );
        }

        #[test]
        fn split_is_additive_and_exclusive(
            r in 0.0f64..2.0,
            s in 0.0f64..2.0,
            u in -1.0f64..=1.0,
        ) {
            let p = reference();
            let pt = KernelPoint::new(r, s, u);
            let full = localization_kernel(pt, &p);
            let sp = kernel_split(pt, &p);
            prop_assert_eq!(sp.near + sp.far, full);
            prop_assert!(sp.near == 0.0 || sp.far == 0.0);
        }

        #[test]
        fn kernel_obeys_the_near_diagonal_bound(
            r in 0.0f64..1.5,
            s in 0.0f64..1.5,
            u in 0.9f64..=1.0,
        ) {
            let p = reference();
            let pt = KernelPoint::new(r, s, u);
            let d = pt.distance();
            prop_assume!(d >= DIAGONAL_FLOOR);
            let lip = p.lipschitz();
            let bound = lip * lip / (2.0 * PI * PI * d * d);
            let got = localization_kernel(pt, &p);
            prop_assert!(got <= bound * (1.0 + 1e-12), "kernel {got:.6e} above {bound:.6e}");
        }

        #[test]
        fn heat_kernel_is_positive_and_decaying(
            t in 1e-3f64..10.0,
            d in 0.0f64..50.0,
        ) {
            let v = heat_kernel_free(t, d);
            prop_assert!(v > 0.0);
            prop_assert!(heat_kernel_free(t, d + 0.5) < v);
        }
    }
}
