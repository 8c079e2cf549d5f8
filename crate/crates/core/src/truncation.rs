//! Soft truncation functions and the truncated mean estimator.
//!
//! `T(x) = −log(1 − x + x²/2)` and its mirror `ψ(x) = log(1 + x + x²/2) =
//! −T(−x)` both behave like `x` near zero and grow only logarithmically,
//! which caps the influence of a single extreme observation. The two
//! quadratics multiply to `1 + x⁴/4`, so `ψ(x) − T(x) = log(1 + x⁴/4)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureMap, Input, LinearModel};
use crate::numeric::dot;

/// Beyond this magnitude `x²` overflows, so the quadratics are evaluated
/// through `log(x²/2)` directly.
const HUGE: f64 = 1e150;

/// `T(x) = −log(1 − x + x²/2)`. Defined on all of `R` since the quadratic
/// is at least `1/2`.
pub fn soft_trunc(x: f64) -> f64 {
    if x.abs() > HUGE {
        return -(2.0 * x.abs().ln() - std::f64::consts::LN_2);
    }
    -(x * (0.5 * x - 1.0)).ln_1p()
}

/// `ψ(x) = log(1 + x + x²/2) = −T(−x)`.
pub fn soft_trunc_mirrored(x: f64) -> f64 {
    if x.abs() > HUGE {
        return 2.0 * x.abs().ln() - std::f64::consts::LN_2;
    }
    (x * (0.5 * x + 1.0)).ln_1p()
}

/// Which soft truncation is applied to scaled loss differences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// `T(x) = −log(1 − x + x²/2)`.
    #[default]
    Standard,
    /// `ψ(x) = log(1 + x + x²/2)`.
    Mirrored,
}

impl Truncation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Truncation::Standard => soft_trunc(x),
            Truncation::Mirrored => soft_trunc_mirrored(x),
        }
    }

    #[inline(always)]
    pub(crate) fn log_sign(self) -> f64 {
        match self {
            Truncation::Standard => -1.0,
            Truncation::Mirrored => 1.0,
        }
    }
}

/// `W(θ, θ') = λ([y − f_θ(x)]² − [y − f_θ'(x)]²)`.
pub fn loss_diff(
    lambda: f64,
    theta: &LinearModel,
    theta_prime: &LinearModel,
    fmap: &FeatureMap,
    x: &Input,
    y: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::config(format!("truncation scale must be positive, got {lambda}")));
    }
    let phi = fmap.eval(x)?;
    crate::error::check_dim(phi.len(), theta.dim())?;
    crate::error::check_dim(phi.len(), theta_prime.dim())?;
    let r = y - dot(&theta.theta, &phi);
    let r_prime = y - dot(&theta_prime.theta, &phi);
    Ok(lambda * (r * r - r_prime * r_prime))
}

pub fn empirical_mean(ys: &[f64]) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::config("mean of an empty sample"));
    }
    Ok(crate::numeric::mean(ys))
}

/// The scale `λ = √(2 log(1/ε) / n)` used by [`robust_mean`].
pub fn robust_mean_scale(n: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("confidence level must lie in (0, 1), got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::config("mean of an empty sample"));
    }
    Ok((2.0 * (1.0 / epsilon).ln() / n as f64).sqrt())
}

/// Truncated mean `(1/(nλ)) Σ ψ(λ Y_i)` tuned for confidence `1 − 2ε` when
/// `E[Y²] ≤ 1`: then `|θ̂ − E Y| ≤ λ` with that probability.
pub fn robust_mean(ys: &[f64], epsilon: f64) -> Result<f64> {
    let lambda = robust_mean_scale(ys.len(), epsilon)?;
    let total: f64 = ys.iter().map(|&y| soft_trunc_mirrored(lambda * y)).sum();
    Ok(total / (ys.len() as f64 * lambda))
}

/// [`robust_mean`] for data with `E[Y²] ≤ second_moment_bound`: the sample
/// is standardized by `√bound`, estimated, and scaled back. The deviation
/// guarantee becomes `√(bound · 2 log(1/ε) / n)`.
pub fn robust_mean_scaled(ys: &[f64], epsilon: f64, second_moment_bound: f64) -> Result<f64> {
    if !(second_moment_bound > 0.0 && second_moment_bound.is_finite()) {
        return Err(Error::config("second moment bound must be positive and finite"));
    }
    let s = second_moment_bound.sqrt();
    let standardized: Vec<f64> = ys.iter().map(|y| y / s).collect();
    Ok(s * robust_mean(&standardized, epsilon)?)
}
