use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::BoundCheck;
use crate::error::{Error, Result};
use crate::numeric::{log_mean_exp, mean};

/// Reference laws for the log-Laplace inequalities, each with closed-form
/// moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum LaplaceFixture {
    Constant {
        value: f64,
    },
    /// `±a` with equal probability.
    Rademacher {
        a: f64,
    },
    /// Uniform on `[−a, a]`.
    Uniform {
        a: f64,
    },
    /// Centred Laplace with the given scale.
    Laplace {
        scale: f64,
    },
}

impl LaplaceFixture {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Rademacher { a } => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            Self::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
            Self::Laplace { scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Constant { value } => value,
            _ => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Constant { value } => value * value,
            Self::Rademacher { a } => a * a,
            Self::Uniform { a } => a * a / 3.0,
            Self::Laplace { scale } => 2.0 * scale * scale,
        }
    }

    /// Essential supremum of `V`.
    pub fn upper_bound(&self) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Rademacher { a } | Self::Uniform { a } => a.abs(),
            Self::Laplace { .. } => f64::INFINITY,
        }
    }

    /// `E exp|V|`.
    pub fn abs_exp_moment(&self) -> f64 {
        match *self {
            Self::Constant { value } => value.abs().exp(),
            Self::Rademacher { a } => a.abs().exp(),
            Self::Uniform { a: 0.0 } => 1.0,
            Self::Uniform { a } => a.abs().exp_m1() / a.abs(),
            Self::Laplace { scale } if scale < 1.0 => 1.0 / (1.0 - scale),
            Self::Laplace { .. } => f64::INFINITY,
        }
    }

    /// `log E exp(t(V − EV))`.
    pub fn centered_log_laplace(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Rademacher { a } => (t * a).cosh().ln(),
            Self::Uniform { a } => {
                let x = t * a;
                if x == 0.0 {
                    0.0
                } else {
                    (x.sinh() / x).ln()
                }
            }
            Self::Laplace { scale } if (t * scale).abs() < 1.0 => -(1.0 - (t * scale).powi(2)).ln(),
            Self::Laplace { .. } => f64::INFINITY,
        }
    }
}

/// The shipped fixture battery.
pub fn standard_fixtures() -> Vec<LaplaceFixture> {
    vec![
        LaplaceFixture::Constant { value: 0.0 },
        LaplaceFixture::Constant { value: 0.7 },
        LaplaceFixture::Rademacher { a: 1.0 },
        LaplaceFixture::Rademacher { a: 0.3 },
        LaplaceFixture::Uniform { a: 0.5 },
        LaplaceFixture::Uniform { a: 2.0 },
        LaplaceFixture::Laplace { scale: 2.0 / 3.0 },
        LaplaceFixture::Laplace { scale: 0.25 },
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 1_000_000, seed: 0x4c61_706c }
    }
}

/// `g(u) = (e^u − 1 − u)/u²`, continued by `1/2` at zero.
pub fn g_fn(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        0.5 + u / 6.0 + u * u / 24.0
    } else {
        (u.exp_m1() - u) / (u * u)
    }
}

/// Monte Carlo `log E exp(t(V − EV))` with a delta-method standard error.
fn mc_log_laplace(fx: &LaplaceFixture, t: f64, mc: &McConfig) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let draws: Vec<f64> = (0..mc.samples).map(|_| fx.sample(&mut rng)).collect();
    let m = mean(&draws);
    let logs: Vec<f64> = draws.iter().map(|v| t * (v - m)).collect();
    let lme = log_mean_exp(&logs);
    let rel: Vec<f64> = logs.iter().map(|l| (l - lme).exp()).collect();
    (lme, crate::numeric::std_error(&rel))
}

/// `log E exp(V − EV) ≤ E(V²) g(b)` for `V ≤ b`; passes when the Monte
/// Carlo left side is within three standard errors of the bound.
pub fn check_log_laplace_d1(fx: &LaplaceFixture, b: f64, mc: &McConfig) -> Result<BoundCheck> {
    if fx.upper_bound() > b {
        return Err(Error::config(format!("fixture {fx:?} is not bounded by {b}")));
    }
    let (lhs, se) = mc_log_laplace(fx, 1.0, mc);
    let rhs = fx.second_moment() * g_fn(b);
    Ok(BoundCheck::new(
        "lemma-d1",
        json!({ "fixture": fx, "b": b, "exact_lhs": fx.centered_log_laplace(1.0), "se": se }),
        lhs,
        rhs,
        3.0 * se,
    ))
}

/// Both conclusions under `E exp|V| ≤ M`: `|EV| ≤ log M` and
/// `log E exp(α(V − EV)) ≤ α²M²/(2√π(1 − |α|))` for each `α`.
pub fn check_log_laplace_d2(fx: &LaplaceFixture, alphas: &[f64], mc: &McConfig) -> Result<Vec<BoundCheck>> {
    let m = fx.abs_exp_moment();
    if !m.is_finite() {
        return Err(Error::MomentUnavailable(format!("E exp|V| is infinite for {fx:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed ^ 0x6d65_616e);
    let draws: Vec<f64> = (0..mc.samples).map(|_| fx.sample(&mut rng)).collect();
    let mean_se = crate::numeric::std_error(&draws);
    let mut out = vec![BoundCheck::new(
        "lemma-d2-mean",
        json!({ "fixture": fx, "M": m, "se": mean_se }),
        mean(&draws).abs(),
        m.ln(),
        3.0 * mean_se,
    )];
    for &alpha in alphas {
        if !(alpha.abs() < 1.0) {
            return Err(Error::config(format!("need |alpha| < 1, got {alpha}")));
        }
        let (lhs, se) = mc_log_laplace(fx, alpha, mc);
        let rhs = alpha * alpha * m * m / (2.0 * std::f64::consts::PI.sqrt() * (1.0 - alpha.abs()));
        out.push(BoundCheck::new(
            "lemma-d2",
            json!({ "fixture": fx, "M": m, "alpha": alpha, "exact_lhs": fx.centered_log_laplace(alpha), "se": se }),
            lhs,
            rhs,
            3.0 * se,
        ));
    }
    Ok(out)
}
