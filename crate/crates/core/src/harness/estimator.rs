use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{erm_box_fit, ols_fit, projection_fit, ridge_fit, truncate_predictor, DEFAULT_ERM_TOL};
use crate::error::{Error, Result};
use crate::model::{Dataset, FeatureMap, LeastSquares, LinearModel, ParamBox};
use crate::posterior::{fit_gibbs, fit_truncated, PosteriorConfig};
use crate::synthetic::DistributionSpec;
use crate::truncation::Truncation;

/// An estimator with its parameters, written `name` or `name(param)`.
///
/// `gibbs` and `trunc-pacbayes*` without a parameter use the default
/// temperature `0.32/(2σ+H)²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorId {
    Ols,
    /// OLS clipped to `[−H, H]`.
    OlsTrunc {
        h: f64,
    },
    Ridge {
        lambda: f64,
    },
    Projection,
    ErmBox,
    Gibbs {
        lambda: Option<f64>,
    },
    /// Final draw of the truncated-posterior chain.
    TruncPacBayes {
        lambda: Option<f64>,
    },
    /// Mean of the truncated-posterior chain.
    TruncPacBayesMean {
        lambda: Option<f64>,
    },
}

/// Which best-in-class predictor excess risk is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    /// The unconstrained linear optimum.
    Linear,
    /// The optimum over the parameter box.
    Box,
}

impl EstimatorId {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ols => "ols",
            Self::OlsTrunc { .. } => "ols-trunc",
            Self::Ridge { .. } => "ridge",
            Self::Projection => "projection",
            Self::ErmBox => "erm-box",
            Self::Gibbs { .. } => "gibbs",
            Self::TruncPacBayes { .. } => "trunc-pacbayes",
            Self::TruncPacBayesMean { .. } => "trunc-pacbayes-mean",
        }
    }

    pub fn reference(&self) -> Reference {
        match self {
            Self::Ols | Self::OlsTrunc { .. } | Self::Ridge { .. } | Self::Projection => Reference::Linear,
            _ => Reference::Box,
        }
    }

    pub fn is_posterior(&self) -> bool {
        matches!(self, Self::Gibbs { .. } | Self::TruncPacBayes { .. } | Self::TruncPacBayesMean { .. })
    }

    /// Temperature given explicitly in the identifier.
    pub fn lambda(&self) -> Option<f64> {
        match self {
            Self::Ridge { lambda } => Some(*lambda),
            Self::Gibbs { lambda } | Self::TruncPacBayes { lambda } | Self::TruncPacBayesMean { lambda } => *lambda,
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let param = match self {
            Self::OlsTrunc { h } => Some(*h),
            Self::Ridge { lambda } => Some(*lambda),
            Self::Gibbs { lambda } | Self::TruncPacBayes { lambda } | Self::TruncPacBayesMean { lambda } => *lambda,
            _ => None,
        };
        match param {
            Some(p) => write!(f, "{}({p:?})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

fn parse_param(name: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse(format!("bad parameter {raw:?} for estimator {name}")))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Parse(format!("estimator {name} needs a finite nonnegative parameter, got {v}")));
    }
    Ok(v)
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.find('(') {
            Some(open) => {
                let inner = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in {s:?}")))?;
                (s[..open].trim(), Some(inner))
            }
            None => (s, None),
        };
        let positive = |raw: &str| -> Result<f64> {
            let v = parse_param(name, raw)?;
            if v == 0.0 {
                return Err(Error::Parse(format!("estimator {name} needs a positive parameter")));
            }
            Ok(v)
        };
        let id = match (name, param) {
            ("ols", None) => Self::Ols,
            ("ols-trunc", Some(p)) => Self::OlsTrunc { h: positive(p)? },
            ("ridge", Some(p)) => Self::Ridge { lambda: parse_param(name, p)? },
            ("projection", None) => Self::Projection,
            ("erm-box", None) => Self::ErmBox,
            ("gibbs", p) => Self::Gibbs { lambda: p.map(positive).transpose()? },
            ("trunc-pacbayes", p) => Self::TruncPacBayes { lambda: p.map(positive).transpose()? },
            ("trunc-pacbayes-mean", p) => Self::TruncPacBayesMean { lambda: p.map(positive).transpose()? },
            ("ols-trunc" | "ridge", None) => {
                return Err(Error::Parse(format!("estimator {name} needs a parameter, e.g. {name}(1.0)")))
            }
            (_, Some(_)) if matches!(name, "ols" | "projection" | "erm-box") => {
                return Err(Error::Parse(format!("estimator {name} takes no parameter")))
            }
            _ => return Err(Error::Parse(format!("unknown estimator {s:?}"))),
        };
        Ok(id)
    }
}

impl TryFrom<String> for EstimatorId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorId> for String {
    fn from(id: EstimatorId) -> Self {
        id.to_string()
    }
}

/// Chain settings shared by the posterior estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorSettings {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_chain")]
    pub chain_length: usize,
    #[serde(default = "default_burn")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default = "default_eta_prime")]
    pub eta_prime: f64,
    /// Overrides the conditional-deviation bound `σ` from the oracle.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Overrides the sup-norm diameter `H` of the box class.
    #[serde(default)]
    pub h: Option<f64>,
}

fn default_m() -> usize {
    crate::posterior::DEFAULT_PRIOR_SAMPLES
}
fn default_chain() -> usize {
    4_000
}
fn default_burn() -> usize {
    1_000
}
fn default_thin() -> usize {
    1
}
fn default_eta_prime() -> f64 {
    0.18
}

impl Default for PosteriorSettings {
    fn default() -> Self {
        Self {
            m: default_m(),
            chain_length: default_chain(),
            burn_in: default_burn(),
            thin: default_thin(),
            truncation: Truncation::Standard,
            eta_prime: default_eta_prime(),
            sigma: None,
            h: None,
        }
    }
}

/// A fitted predictor in the form its exact risk is computed from.
#[derive(Clone, Debug, PartialEq)]
pub enum Fitted {
    Linear(LinearModel),
    Clipped { model: LinearModel, h: f64 },
}

impl Fitted {
    pub fn theta(&self) -> &[f64] {
        match self {
            Self::Linear(m) | Self::Clipped { model: m, .. } => &m.theta,
        }
    }

    /// Exact risk under the law.
    pub fn risk(&self, law: &DistributionSpec) -> Result<f64> {
        match self {
            Self::Linear(m) => law.exact_risk(&m.theta),
            Self::Clipped { model, h } => law.truncated_risk(model, *h),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub fitted: Fitted,
    pub accept_rate: Option<f64>,
}

/// Fits one estimator. `lambda` is the resolved temperature for the
/// posterior estimators and ignored otherwise.
pub fn fit_estimator(
    id: &EstimatorId,
    data: &Dataset,
    fmap: &FeatureMap,
    bx: &ParamBox,
    settings: &PosteriorSettings,
    lambda: Option<f64>,
    seed: u64,
) -> Result<FitOutcome> {
    let linear = |m: LinearModel| FitOutcome { fitted: Fitted::Linear(m), accept_rate: None };
    Ok(match id {
        EstimatorId::Ols => linear(ols_fit(data, fmap)?.model),
        EstimatorId::OlsTrunc { h } => {
            let clipped = truncate_predictor(ols_fit(data, fmap)?.model, *h)?;
            FitOutcome { fitted: Fitted::Clipped { model: clipped.model, h: clipped.h }, accept_rate: None }
        }
        EstimatorId::Ridge { lambda } => linear(ridge_fit(data, fmap, *lambda)?),
        EstimatorId::Projection => linear(projection_fit(data, fmap)?),
        EstimatorId::ErmBox => linear(erm_box_fit(data, fmap, bx, DEFAULT_ERM_TOL)?),
        EstimatorId::Gibbs { .. } | EstimatorId::TruncPacBayes { .. } | EstimatorId::TruncPacBayesMean { .. } => {
            let lambda = lambda.ok_or_else(|| Error::config(format!("no temperature resolved for {id}")))?;
            let mut cfg = PosteriorConfig::new(lambda, settings.chain_length, settings.burn_in, seed);
            cfg.m = settings.m;
            cfg.thin = settings.thin;
            cfg.truncation = settings.truncation;
            let fit = match id {
                EstimatorId::Gibbs { .. } => fit_gibbs(data, fmap, bx, &LeastSquares, &cfg)?,
                _ => fit_truncated(data, fmap, bx, &cfg)?,
            };
            let model = match id {
                EstimatorId::TruncPacBayesMean { .. } => fit.mean,
                _ => fit.draw,
            };
            FitOutcome { fitted: Fitted::Linear(model), accept_rate: Some(fit.chain.acceptance_rate) }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "ols",
            "ols-trunc(2.0)",
            "ridge(0.0)",
            "ridge(0.5)",
            "projection",
            "erm-box",
            "gibbs",
            "gibbs(0.01)",
            "trunc-pacbayes",
            "trunc-pacbayes(0.125)",
            "trunc-pacbayes-mean",
        ] {
            let id: EstimatorId = s.parse().unwrap();
            assert_eq!(id.to_string(), s);
            assert_eq!(id.to_string().parse::<EstimatorId>().unwrap(), id);
        }
        assert_eq!(" ridge( 1 ) ".parse::<EstimatorId>().unwrap(), EstimatorId::Ridge { lambda: 1.0 });
    }

    #[test]
    fn rejects_malformed_ids() {
        for s in ["", "lasso", "ols(1)", "ridge", "ridge(-1)", "gibbs(0)", "gibbs(nan)", "ols-trunc(1", "erm-box()"] {
            assert!(s.parse::<EstimatorId>().is_err(), "{s}");
        }
    }

    #[test]
    fn reference_classes() {
        assert_eq!(EstimatorId::Ols.reference(), Reference::Linear);
        assert_eq!(EstimatorId::ErmBox.reference(), Reference::Box);
        assert_eq!(EstimatorId::TruncPacBayes { lambda: None }.reference(), Reference::Box);
        assert!(EstimatorId::Gibbs { lambda: None }.is_posterior());
        assert!(!EstimatorId::Projection.is_posterior());
    }
}
