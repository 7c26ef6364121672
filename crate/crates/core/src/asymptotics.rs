//! Proportional-regime analysis of the LASSO when the signal is zero.
//!
//! With an `d × N` Gaussian design, `δ = d/N` and noise level `σ`, the LASSO
//! solution concentrates around the state `(α, τ*)` solving
//!
//! ```text
//! λ   = α τ* [1 − (2/δ) P{Z ≥ α}]
//! τ*² = σ² / (1 − E[η(Z; α)²] / δ)
//! ```
//!
//! where `η` is soft thresholding and `Z ~ N(0, 1)`. As `λ → 0` the first
//! equation forces `P{Z ≥ α} = δ/2`, and the squared solution norm (with
//! `σ² = 1/d`) tends to `E[η²] / (δ − E[η²])`; it is at most one exactly when
//! `δ ≤ δ*`, i.e. when the sampling density `1/δ` is at least `ρ* ≈ 2.8188`.

use serde::Serialize;

use crate::{Result, SscError};

/// Density threshold `1/δ*`, rounded as usually quoted.
pub const RHO_STAR: f64 = 2.8188;

const FRAC_SQRT_2_PI: f64 = 0.398_942_280_401_432_7; // 1/√(2π)

/// `η(t, θ) = sgn(t)·max(|t| − θ, 0)`.
pub fn soft_threshold(t: f64, theta: f64) -> f64 {
    if t > theta {
        t - theta
    } else if t < -theta {
        t + theta
    } else {
        0.0
    }
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse of `erfc` on `(0, 2)`, by safeguarded Newton iteration.
pub fn erfc_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return f64::INFINITY;
    }
    if y >= 2.0 {
        return f64::NEG_INFINITY;
    }
    if y == 1.0 {
        return 0.0;
    }
    // bracket, erfc is decreasing
    let (mut lo, mut hi) = (-6.0f64, 6.0f64);
    while erfc(lo) < y {
        lo *= 2.0;
    }
    while erfc(hi) > y {
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = erfc(x) - y;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let deriv = -std::f64::consts::FRAC_2_SQRT_PI * (-x * x).exp();
        let mut next = x - f / deriv;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// `P{Z ≥ α}` for standard normal `Z`.
pub fn gaussian_tail(alpha: f64) -> f64 {
    0.5 * erfc(alpha / std::f64::consts::SQRT_2)
}

/// `E[η(Z; α)²] = (α² + 1) erfc(α/√2) − α √(2/π) e^{−α²/2}`.
pub fn eta_moment(alpha: f64) -> f64 {
    let phi = FRAC_SQRT_2_PI * (-0.5 * alpha * alpha).exp();
    ((alpha * alpha + 1.0) * erfc(alpha / std::f64::consts::SQRT_2) - 2.0 * alpha * phi).max(0.0)
}

/// Solution of the fixed-point equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticState {
    pub delta: f64,
    pub alpha: f64,
    pub tau_star: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// `E[η(Z; α)²]` at the solution.
    pub eta_moment: f64,
}

impl AsymptoticState {
    /// `‖x̂‖²` in the normalization `σ² = 1/d`: `E[η²] / (δ − E[η²])`.
    pub fn normalized_norm_sq(&self) -> f64 {
        self.eta_moment / (self.delta - self.eta_moment)
    }

    /// Predicted `‖x̂‖²` for a problem with `num_columns` unknowns:
    /// `N δ (τ*² − σ²)`.
    pub fn predicted_norm_sq(&self, num_columns: usize) -> f64 {
        num_columns as f64 * self.delta * (self.tau_star * self.tau_star - self.sigma * self.sigma)
    }

    /// Residuals of the two defining equations at this state.
    pub fn residuals(&self) -> (f64, f64) {
        let calib = self.lambda
            - self.alpha * self.tau_star * (1.0 - 2.0 / self.delta * gaussian_tail(self.alpha));
        let var = self.tau_star * self.tau_star
            - self.sigma * self.sigma / (1.0 - eta_moment(self.alpha) / self.delta);
        (calib, var)
    }
}

/// `α` at which `λ → 0`: `√2·erfc⁻¹(δ)`.
pub fn zero_penalty_alpha(delta: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(delta)
}

pub fn fixed_point(delta: f64, sigma: f64, lambda: f64) -> Result<AsymptoticState> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SscError::InvalidConfig(format!("δ must lie in (0, 1), got {delta}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(SscError::InvalidConfig(format!("σ must be positive, got {sigma}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SscError::InvalidConfig(format!("λ must be nonnegative, got {lambda}")));
    }
    let state = |alpha: f64| {
        let e = eta_moment(alpha);
        AsymptoticState {
            delta,
            alpha,
            tau_star: sigma / (1.0 - e / delta).sqrt(),
            lambda,
            sigma,
            eta_moment: e,
        }
    };
    let alpha0 = zero_penalty_alpha(delta);
    if lambda == 0.0 {
        return Ok(state(alpha0));
    }
    // g(α) = ασ[1 − erfc(α/√2)/δ] − λ √(1 − E[η²]/δ); g(α0) < 0, g → ∞
    let g = |alpha: f64| {
        alpha * sigma * (1.0 - 2.0 * gaussian_tail(alpha) / delta) - lambda * (1.0 - eta_moment(alpha) / delta).sqrt()
    };
    let mut lo = alpha0;
    let mut hi = alpha0.max(1.0) * 2.0;
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 || !g(hi).is_finite() {
            return Err(SscError::NoFixedPoint(format!(
                "no sign change of the calibration equation up to α = {hi:.3e} (δ = {delta}, σ = {sigma}, λ = {lambda})"
            )));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v.abs() <= 1e-13 || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(state(mid))
}

/// Intersection of `δ = erfc(α/√2)` with `√(2/π)·α/(α² + ½)·e^{−α²/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoStar {
    pub alpha: f64,
    pub delta: f64,
    pub rho: f64,
}

pub fn rho_star() -> RhoStar {
    let h = |a: f64| {
        erfc(a / std::f64::consts::SQRT_2) - 2.0 * FRAC_SQRT_2_PI * a / (a * a + 0.5) * (-0.5 * a * a).exp()
    };
    // h > 0 near 0, h < 0 at 5
    let (mut lo, mut hi) = (1e-6, 5.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let delta = erfc(alpha / std::f64::consts::SQRT_2);
    RhoStar { alpha, delta, rho: 1.0 / delta }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(2.0, 1.0), 1.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        for t in [-2.5, -0.1, 0.0, 0.7, 9.0] {
            assert_eq!(soft_threshold(t, 0.0), t);
        }
    }

    #[test]
    fn erfc_inverse_round_trips() {
        for y in [1e-10, 1e-3, 0.1, 0.35476, 0.9, 1.0, 1.5, 1.999] {
            let x = erfc_inv(y);
            assert!((erfc(x) - y).abs() <= 1e-14 * y.max(1e-3), "y = {y}");
        }
    }

    #[test]
    fn eta_moment_limits() {
        assert!((eta_moment(0.0) - 1.0).abs() < 1e-15);
        assert!(eta_moment(40.0) < 1e-300);
    }

    #[test]
    fn crossing_point_moment_is_half_delta() {
        let v = eta_moment(0.9254);
        assert!((v - 0.35476 / 2.0).abs() < 2e-4, "{v}");
    }

    #[test]
    fn eta_moment_strictly_decreasing() {
        let mut prev = eta_moment(0.0);
        for k in 1..=400 {
            let v = eta_moment(k as f64 * 0.02);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn zero_penalty_limit() {
        for delta in [0.1, 0.2, 0.35476] {
            let s = fixed_point(delta, 0.1, 0.0).unwrap();
            assert!((s.alpha - std::f64::consts::SQRT_2 * erfc_inv(delta)).abs() < 1e-15);
            let (r1, r2) = s.residuals();
            assert!(r1.abs() < 1e-9 && r2.abs() < 1e-9);
        }
        let s = fixed_point(0.35476, 0.1, 0.0).unwrap();
        assert!((s.normalized_norm_sq() - 1.0).abs() < 1e-3, "{}", s.normalized_norm_sq());
    }

    #[test]
    fn positive_penalty_residuals() {
        for (delta, sigma, lambda) in [(0.2, 0.05, 0.01), (0.5, 1.0, 0.3), (0.05, 0.2, 2.0)] {
            let s = fixed_point(delta, sigma, lambda).unwrap();
            let (r1, r2) = s.residuals();
            assert!(r1.abs() <= 1e-9 && r2.abs() <= 1e-9, "{r1} {r2}");
            assert!(s.tau_star >= sigma);
        }
    }

    #[test]
    fn norm_shrinks_with_penalty() {
        let small = fixed_point(0.2, 0.05, 1e-4).unwrap();
        let large = fixed_point(0.2, 0.05, 1e-2).unwrap();
        assert!(large.normalized_norm_sq() < small.normalized_norm_sq());
    }

    #[test]
    fn invalid_inputs() {
        assert!(fixed_point(1.0, 1.0, 0.0).is_err());
        assert!(fixed_point(0.5, 0.0, 0.0).is_err());
        assert!(fixed_point(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn crossing_constants() {
        let r = rho_star();
        assert!((r.alpha - 0.9254).abs() < 1e-3, "{r:?}");
        assert!((r.delta - 0.35476).abs() < 1e-4, "{r:?}");
        assert!((r.rho - 2.8188).abs() < 1e-3, "{r:?}");
        assert_eq!(r.rho, 1.0 / r.delta);
    }
}
