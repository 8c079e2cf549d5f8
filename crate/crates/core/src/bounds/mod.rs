//! Explicit deviation-bound constants and numerical checks of the
//! auxiliary inequalities they rest on.

mod condition;
mod laplace;
mod variance;

use serde::{Deserialize, Serialize};

pub use condition::{check_condition_c, j_beta, j_beta_fn, JValue, QuadConfig};
pub use laplace::{check_log_laplace_d1, check_log_laplace_d2, g_fn, standard_fixtures, LaplaceFixture, McConfig};
pub use variance::{lemma34_eta, lemma36_v, lemma37_v, Lemma34, Lemma37, Lemma37Config};

use crate::error::{Error, Result};

/// One checked inequality `lhs ≤ rhs`, in the shape written to bound
/// reports. `margin = rhs − lhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub theorem: String,
    pub params: serde_json::Value,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    /// Passes when `lhs ≤ rhs + slack`.
    pub fn new(theorem: impl Into<String>, params: serde_json::Value, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self { theorem: theorem.into(), params, lhs, rhs, margin: rhs - lhs, pass: lhs <= rhs + slack }
    }
}

fn check_eta(eta: f64, eta_prime: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::config(format!("eta = {eta} must lie in (0, 1)")));
    }
    if !(eta_prime > 0.0 && eta_prime < 1.0 - eta) {
        return Err(Error::config(format!("eta' = {eta_prime} must lie in (0, 1 - eta) = (0, {})", 1.0 - eta)));
    }
    Ok(())
}

fn check_level(eps: f64, n: usize) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!("confidence level must lie in (0, 1), got {eps}")));
    }
    if n == 0 {
        return Err(Error::config("sample size must be positive"));
    }
    Ok(())
}

/// `C1 = log(G(1+η)²/(η′(1−η))) / (η(1−η−η′))`, `C2 = 2/(η(1−η−η′))`.
fn truncated_constants(eta: f64, eta_prime: f64, g: f64) -> (f64, f64) {
    let denom = eta * (1.0 - eta - eta_prime);
    let c1 = (g * (1.0 + eta).powi(2) / (eta_prime * (1.0 - eta))).ln() / denom;
    (c1, 2.0 / denom)
}

/// The constants of the truncated-posterior bound with `V = (2σ + H)²`,
/// `G = 1`:
/// `R(f̂) − R(f*) ≤ (2σ+H)² (C1·D + C2·log(2/ε)) / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacBayesConstants {
    pub sigma: f64,
    pub h: f64,
    pub lambda: f64,
    /// `η = λ(2σ+H)²`.
    pub eta: f64,
    pub eta_prime: f64,
    pub c1: f64,
    pub c2: f64,
    /// `V = (2σ+H)²`.
    pub v: f64,
}

impl PacBayesConstants {
    /// Bound with `D = d` (general best-in-class reference).
    pub fn bound(&self, d: usize, eps: f64, n: usize) -> Result<f64> {
        check_level(eps, n)?;
        Ok(self.v * (self.c1 * d as f64 + self.c2 * (2.0 / eps).ln()) / n as f64)
    }

    /// Bound with `D = d/2`, valid when the best-in-class reference is the
    /// unconstrained linear optimum.
    pub fn bound_linear(&self, d: usize, eps: f64, n: usize) -> Result<f64> {
        check_level(eps, n)?;
        Ok(self.v * (0.5 * self.c1 * d as f64 + self.c2 * (2.0 / eps).ln()) / n as f64)
    }

    /// `γ = λnη′`.
    pub fn gamma(&self, n: usize) -> f64 {
        self.lambda * n as f64 * self.eta_prime
    }

    /// `γ* = λn(1+η)`.
    pub fn gamma_star(&self, n: usize) -> f64 {
        self.lambda * n as f64 * (1.0 + self.eta)
    }
}

pub fn thm21_constants(sigma: f64, h: f64, lambda: f64, eta_prime: f64) -> Result<PacBayesConstants> {
    if !(sigma >= 0.0 && h >= 0.0 && sigma.is_finite() && h.is_finite()) {
        return Err(Error::config(format!("sigma and H must be finite and >= 0 (got {sigma}, {h})")));
    }
    if !(lambda > 0.0) {
        return Err(Error::config(format!("lambda must be positive, got {lambda}")));
    }
    let v = lemma36_v(sigma, h)?;
    let eta = lambda * v;
    check_eta(eta, eta_prime)?;
    let (c1, c2) = truncated_constants(eta, eta_prime, 1.0);
    Ok(PacBayesConstants { sigma, h, lambda, eta, eta_prime, c1, c2, v })
}

/// `(C1′, C2′)` of the truncated bound under a general variance constant
/// `V` and complexity constant `G`, with `η = λV`.
pub fn thm35_constants(v: f64, g: f64, lambda: f64, eta_prime: f64) -> Result<(f64, f64)> {
    if !(v > 0.0 && v.is_finite()) || !(g > 0.0 && g.is_finite()) {
        return Err(Error::config(format!("V and G must be positive and finite (got {v}, {g})")));
    }
    let eta = lambda * v;
    check_eta(eta, eta_prime)?;
    Ok(truncated_constants(eta, eta_prime, g))
}

/// `V (C1′ D + C2′ log(2/ε)) / n`.
pub fn thm35_bound(v: f64, d_const: f64, g: f64, eps: f64, n: usize, lambda: f64, eta_prime: f64) -> Result<f64> {
    check_level(eps, n)?;
    if !(d_const > 0.0) {
        return Err(Error::config(format!("complexity constant D must be positive, got {d_const}")));
    }
    let (c1, c2) = thm35_constants(v, g, lambda, eta_prime)?;
    Ok(v * (c1 * d_const + c2 * (2.0 / eps).ln()) / n as f64)
}

/// Gibbs posterior constants `C1′ = log(G(1+η)/η′)/(λ(1−η−η′))` and
/// `C2′ = 2/(λ(1−η−η′))` under the exponential-moment condition with
/// parameters `(λ, η)`.
pub fn thm32_constants(lambda: f64, eta: f64, eta_prime: f64, g: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) || !(g > 0.0) {
        return Err(Error::config("lambda and G must be positive"));
    }
    check_eta(eta, eta_prime)?;
    let denom = lambda * (1.0 - eta - eta_prime);
    Ok(((g * (1.0 + eta) / eta_prime).ln() / denom, 2.0 / denom))
}

/// `(C1′ D + C2′ log(2/ε)) / n` for the Gibbs posterior.
pub fn thm32_bound(lambda: f64, eta: f64, eta_prime: f64, d_const: f64, g: f64, eps: f64, n: usize) -> Result<f64> {
    check_level(eps, n)?;
    let (c1, c2) = thm32_constants(lambda, eta, eta_prime, g)?;
    Ok((c1 * d_const + c2 * (2.0 / eps).ln()) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig3(x: f64) -> f64 {
        let mag = 10f64.powf(x.abs().log10().floor() - 2.0);
        (x / mag).round() * mag
    }

    #[test]
    fn theorem_constants_at_default_scale() {
        for (sigma, h) in [(1.0, 1.0), (0.5, 3.0), (2.0, 0.0)] {
            let scale: f64 = 2.0 * sigma + h;
            let c = thm21_constants(sigma, h, 0.32 / (scale * scale), 0.18).unwrap();
            assert!((c.eta - 0.32).abs() < 1e-12);
            assert_eq!(sig3(c.c1), 16.6);
            assert_eq!(sig3(c.c2), 12.5);
            assert_eq!(sig3(c.c1 / 2.0), 8.3);
        }
    }

    #[test]
    fn constants_diverge_at_the_boundary() {
        let eta = 0.32;
        let mut last = 0.0;
        for k in 1..=40 {
            let gap = 0.5f64.powi(k);
            let eta_prime = (1.0 - eta) - gap;
            let (c1, c2) = truncated_constants(eta, eta_prime, 1.0);
            assert!(c1.is_finite() && c1 > 0.0 && c2 > 0.0);
            if k > 2 {
                assert!(c1 > last);
            }
            last = c1;
        }
        assert!(last > 1e10);
        assert!(thm21_constants(1.0, 1.0, 0.32 / 9.0, 0.68).is_err());
        assert!(thm21_constants(1.0, 1.0, 1.0 / 9.0, 0.1).is_err());
    }

    #[test]
    fn thm35_collapses_to_thm21() {
        let (sigma, h, lambda, ep) = (0.7, 1.3, 0.02, 0.2);
        let c = thm21_constants(sigma, h, lambda, ep).unwrap();
        let v = lemma36_v(sigma, h).unwrap();
        for (d, eps, n) in [(1, 0.05, 100), (3, 0.01, 1000)] {
            let a = c.bound(d, eps, n).unwrap();
            let b = thm35_bound(v, d as f64, 1.0, eps, n, lambda, ep).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn thm35_is_log_additive_in_g() {
        let (v, dd, eps, n, lambda, ep) = (4.0, 2.0, 0.05, 200, 0.08, 0.18);
        let eta = lambda * v;
        let b1 = thm35_bound(v, dd, 1.5, eps, n, lambda, ep).unwrap();
        let b2 = thm35_bound(v, dd, 3.0, eps, n, lambda, ep).unwrap();
        let want = v * dd * 2f64.ln() / (eta * (1.0 - eta - ep)) / n as f64;
        assert!((b2 - b1 - want).abs() < 1e-12);
    }

    #[test]
    fn gibbs_constants() {
        let (c1, c2) = thm32_constants(0.5, 0.2, 0.3, 2.0).unwrap();
        assert!((c1 - (2.0f64 * 1.2 / 0.3).ln() / (0.5 * 0.5)).abs() < 1e-12);
        assert!((c2 - 8.0).abs() < 1e-12);
        let b = thm32_bound(0.5, 0.2, 0.3, 2.0, 2.0, 0.1, 10).unwrap();
        assert!((b - (c1 * 2.0 + c2 * 20f64.ln()) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_choices() {
        let c = thm21_constants(1.0, 1.0, 0.32 / 9.0, 0.18).unwrap();
        assert!((c.gamma(100) - 0.32 / 9.0 * 100.0 * 0.18).abs() < 1e-12);
        assert!((c.gamma_star(100) - 0.32 / 9.0 * 100.0 * 1.32).abs() < 1e-12);
    }
}
