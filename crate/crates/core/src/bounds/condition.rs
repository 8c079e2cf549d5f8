use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};
use crate::model::ParamBox;
use crate::numeric::log_mean_exp;
use crate::synthetic::RiskOracle;

/// Settings for `J(β)`: midpoint rule with resolution doubling until two
/// successive Richardson-extrapolated estimates agree within `tol`, for `d ≤ 3`; Monte Carlo with
/// `mc_samples` uniform draws beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadConfig {
    pub initial_resolution: usize,
    pub max_cells: usize,
    pub tol: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { initial_resolution: 32, max_cells: 1 << 22, tol: 1e-4, mc_samples: 200_000, seed: 0x4a_6265_7461 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JValue {
    pub value: f64,
    /// Disagreement of successive Richardson estimates for quadrature,
    /// standard error for Monte Carlo.
    pub error: f64,
    pub monte_carlo: bool,
}

fn midpoint_log_mean<F: Fn(&[f64]) -> f64>(f: &F, bx: &ParamBox, r: usize) -> f64 {
    let d = bx.dim();
    let cells = r.pow(d as u32);
    let h: Vec<f64> = bx.widths().iter().map(|w| w / r as f64).collect();
    let mut point = vec![0.0; d];
    let mut logs = Vec::with_capacity(cells);
    for k in 0..cells {
        let mut rest = k;
        for j in 0..d {
            point[j] = bx.lo()[j] + ((rest % r) as f64 + 0.5) * h[j];
            rest /= r;
        }
        logs.push(f(&point));
    }
    log_mean_exp(&logs)
}

/// `J(β) = −log ∫ exp(−β R̄(θ)) π(dθ)` with `π` uniform on the box, for any
/// nonnegative excess-risk function.
pub fn j_beta_fn<F>(excess: F, bx: &ParamBox, beta: f64, quad: &QuadConfig) -> Result<JValue>
where
    F: Fn(&[f64]) -> f64,
{
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::config(format!("beta must be finite and >= 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(JValue { value: 0.0, error: 0.0, monte_carlo: false });
    }
    let integrand = |t: &[f64]| -beta * excess(t);
    let d = bx.dim();
    if d <= 3 {
        let mut r = quad.initial_resolution.max(2);
        let mut prev = -midpoint_log_mean(&integrand, bx, r);
        let mut prev_extrapolated = f64::NAN;
        loop {
            let next_r = 2 * r;
            if next_r.pow(d as u32) > quad.max_cells {
                return Err(Error::Quadrature(format!("J({beta}) still moving after resolution {r} per axis")));
            }
            let next = -midpoint_log_mean(&integrand, bx, next_r);
            // midpoint error is O(h²): one Richardson step per level
            let extrapolated = next + (next - prev) / 3.0;
            let gap = (extrapolated - prev_extrapolated).abs();
            if gap <= quad.tol || (next - prev).abs() <= f64::EPSILON * next.abs().max(1.0) {
                return Ok(JValue {
                    value: extrapolated,
                    error: if gap.is_nan() { (next - prev).abs() } else { gap },
                    monte_carlo: false,
                });
            }
            prev = next;
            prev_extrapolated = extrapolated;
            r = next_r;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(quad.seed);
    let logs: Vec<f64> = (0..quad.mc_samples).map(|_| integrand(&bx.sample_uniform(&mut rng))).collect();
    let lme = log_mean_exp(&logs);
    // delta method on the log of a sample mean
    let rel: Vec<f64> = logs.iter().map(|l| (l - lme).exp()).collect();
    let se = crate::numeric::std_error(&rel);
    Ok(JValue { value: -lme, error: se, monte_carlo: true })
}

pub fn j_beta(oracle: &RiskOracle, bx: &ParamBox, beta: f64, quad: &QuadConfig) -> Result<JValue> {
    crate::error::check_dim(oracle.dim(), bx.dim())?;
    j_beta_fn(|t| oracle.excess_risk(t), bx, beta, quad)
}

/// `J(β) − J(α) ≤ D log(Gβ/α)`, passing within the combined numerical
/// error of both `J` values.
pub fn check_condition_c(
    oracle: &RiskOracle,
    bx: &ParamBox,
    alpha: f64,
    beta: f64,
    d_const: f64,
    g: f64,
    quad: &QuadConfig,
) -> Result<BoundCheck> {
    if !(alpha > 0.0 && alpha <= beta) {
        return Err(Error::config(format!("need 0 < alpha <= beta, got alpha={alpha}, beta={beta}")));
    }
    let ja = j_beta(oracle, bx, alpha, quad)?;
    let jb = j_beta(oracle, bx, beta, quad)?;
    let lhs = jb.value - ja.value;
    let rhs = d_const * (g * beta / alpha).ln();
    let slack = if ja.monte_carlo { 3.0 * (ja.error + jb.error) } else { ja.error + jb.error };
    Ok(BoundCheck::new(
        "condition-c",
        json!({ "alpha": alpha, "beta": beta, "D": d_const, "G": g, "d": bx.dim() }),
        lhs,
        rhs,
        slack,
    ))
}
