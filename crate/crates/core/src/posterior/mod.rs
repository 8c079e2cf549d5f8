//! The truncated PAC-Bayesian posterior `π̂ ∝ exp(−Ê) π` and the Gibbs
//! posterior `∝ exp(−λ Σ ℓ̃) π` over a parameter box with uniform prior `π`,
//! plus a random-walk Metropolis sampler and a grid oracle for small `d`.

mod grid;
mod mh;
mod target;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use grid::{binned_total_variation, grid_posterior_oracle, histogram, GridMasses};
pub use mh::{mh_sample, ChainResult};
pub use target::{GibbsTarget, TruncatedTarget};

use crate::error::{Error, Result};
use crate::model::{Dataset, FeatureMap, LinearModel, Loss, ParamBox};
use crate::truncation::Truncation;

pub const DEFAULT_PRIOR_SAMPLES: usize = 256;

/// `λ = 0.32 (2σ + H)⁻²`.
pub fn default_lambda(sigma: f64, h: f64) -> Result<f64> {
    let scale = 2.0 * sigma + h;
    if !(sigma >= 0.0 && h >= 0.0 && scale > 0.0 && scale.is_finite()) {
        return Err(Error::config(format!(
            "default scale needs finite sigma, H >= 0 with 2 sigma + H > 0 (got {sigma}, {h})"
        )));
    }
    Ok(0.32 / (scale * scale))
}

/// `m` i.i.d. uniform draws from the box, frozen and shared by every
/// evaluation of `Ê` within one fit.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSampleSet {
    thetas: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl PriorSampleSet {
    pub fn draw(bx: &ParamBox, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("prior sample set needs m >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thetas = (0..m).map(|_| bx.sample_uniform(&mut rng)).collect();
        Ok(Self { thetas, seed: Some(seed) })
    }

    /// A hand-picked set, e.g. for tabulated fixtures.
    pub fn from_thetas(thetas: Vec<Vec<f64>>) -> Result<Self> {
        let d = thetas.first().map(Vec::len).ok_or_else(|| Error::config("prior sample set needs m >= 1"))?;
        for t in &thetas {
            crate::error::check_dim(d, t.len())?;
        }
        Ok(Self { thetas, seed: None })
    }

    /// The first `k` draws. Draws are sequential, so `draw(bx, 2m, s)`
    /// extends `draw(bx, m, s)`.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::config(format!("prefix {k} outside 1..={}", self.len())));
        }
        Ok(Self { thetas: self.thetas[..k].to_vec(), seed: self.seed })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.thetas[0].len()
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorConfig {
    pub lambda: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    pub chain_length: usize,
    pub burn_in: usize,
    /// Per-coordinate random-walk standard deviation; `None` means 5% of
    /// each box width.
    #[serde(default)]
    pub proposal_scale: Option<Vec<f64>>,
    /// Keep every `thin`-th post burn-in state.
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_adapt")]
    pub adapt: bool,
    #[serde(default)]
    pub truncation: Truncation,
    pub seed: u64,
}

fn default_m() -> usize {
    DEFAULT_PRIOR_SAMPLES
}

fn default_thin() -> usize {
    1
}

fn default_adapt() -> bool {
    true
}

impl PosteriorConfig {
    pub fn new(lambda: f64, chain_length: usize, burn_in: usize, seed: u64) -> Self {
        Self {
            lambda,
            m: DEFAULT_PRIOR_SAMPLES,
            chain_length,
            burn_in,
            proposal_scale: None,
            thin: 1,
            adapt: true,
            truncation: Truncation::Standard,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.m == 0 {
            return Err(Error::config("prior sample count m must be >= 1"));
        }
        if self.burn_in >= self.chain_length {
            return Err(Error::config(format!(
                "burn-in {} must be shorter than the chain length {}",
                self.burn_in, self.chain_length
            )));
        }
        if self.thin == 0 {
            return Err(Error::config("thinning interval must be >= 1"));
        }
        if let Some(scale) = &self.proposal_scale {
            if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::config("proposal scales must be positive"));
            }
        }
        Ok(())
    }

    /// Seed for the prior sample set, kept apart from the chain's stream.
    pub fn prior_seed(&self) -> u64 {
        crate::harness::seed::mix(self.seed, 0x70_7269_6f72)
    }
}

/// Coordinatewise average of the chain's draws; inside the box by convexity.
pub fn posterior_mean(chain: &ChainResult) -> Result<LinearModel> {
    let first = chain.draws.first().ok_or_else(|| Error::config("posterior mean of an empty chain"))?;
    let mut acc = vec![0.0; first.len()];
    for draw in &chain.draws {
        for (a, v) in acc.iter_mut().zip(draw) {
            *a += v;
        }
    }
    let k = chain.draws.len() as f64;
    Ok(LinearModel::new(acc.into_iter().map(|a| a / k).collect()))
}

/// A fitted truncated posterior: its chain, final draw and mean.
#[derive(Clone, Debug)]
pub struct PosteriorFit {
    pub chain: ChainResult,
    pub draw: LinearModel,
    pub mean: LinearModel,
}

/// Samples the truncated posterior with a fresh prior sample set.
pub fn fit_truncated(
    data: &Dataset,
    fmap: &FeatureMap,
    bx: &ParamBox,
    config: &PosteriorConfig,
) -> Result<PosteriorFit> {
    config.validate()?;
    let prior = PriorSampleSet::draw(bx, config.m, config.prior_seed())?;
    let target = TruncatedTarget::new(data, fmap, &prior, config.lambda, config.truncation)?;
    finish(mh_sample(|t| target.log_density(t), bx, config)?)
}

pub fn fit_gibbs(
    data: &Dataset,
    fmap: &FeatureMap,
    bx: &ParamBox,
    loss: &dyn Loss,
    config: &PosteriorConfig,
) -> Result<PosteriorFit> {
    config.validate()?;
    let target = GibbsTarget::new(data, fmap, config.lambda, loss)?;
    finish(mh_sample(|t| target.log_density(t), bx, config)?)
}

fn finish(chain: ChainResult) -> Result<PosteriorFit> {
    let mean = posterior_mean(&chain)?;
    let draw = LinearModel::new(chain.final_draw.clone());
    Ok(PosteriorFit { chain, draw, mean })
}

/// `Ê_m(θ)` for one query; builds a throwaway [`TruncatedTarget`].
pub fn xi_hat(
    theta: &LinearModel,
    data: &Dataset,
    lambda: f64,
    prior: &PriorSampleSet,
    fmap: &FeatureMap,
    truncation: Truncation,
) -> Result<f64> {
    TruncatedTarget::new(data, fmap, prior, lambda, truncation)?.xi_hat_checked(&theta.theta)
}

/// `−Ê_m(θ)`, the unnormalized log-density of `π̂` against the prior.
pub fn log_posterior_trunc(
    theta: &LinearModel,
    data: &Dataset,
    lambda: f64,
    prior: &PriorSampleSet,
    fmap: &FeatureMap,
    truncation: Truncation,
) -> Result<f64> {
    Ok(-xi_hat(theta, data, lambda, prior, fmap, truncation)?)
}

/// `−λ Σ ℓ̃(Y_i, f_θ(X_i))`.
pub fn log_posterior_gibbs(
    theta: &LinearModel,
    data: &Dataset,
    lambda: f64,
    loss: &dyn Loss,
    fmap: &FeatureMap,
) -> Result<f64> {
    let target = GibbsTarget::new(data, fmap, lambda, loss)?;
    crate::error::check_dim(target.dim(), theta.dim())?;
    Ok(target.log_density(&theta.theta))
}
