use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Result};
use crate::model::ParamBox;
use crate::posterior::PosteriorConfig;

const ADAPT_WINDOW: usize = 100;
const TARGET_ACCEPT: (f64, f64) = (0.2, 0.5);

#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    /// Post burn-in states, thinned.
    pub draws: Vec<Vec<f64>>,
    /// Fraction of accepted proposals after burn-in.
    pub acceptance_rate: f64,
    /// The last state of the chain: the randomized estimate.
    pub final_draw: Vec<f64>,
    /// Log-density of each kept draw.
    pub log_density_trace: Vec<f64>,
    /// Proposal scale in force after burn-in.
    pub proposal_scale: Vec<f64>,
    pub warning: Option<String>,
}

impl ChainResult {
    /// A bare chain holding the given draws, with no sampler metadata.
    pub fn from_draws(draws: Vec<Vec<f64>>) -> Self {
        Self {
            final_draw: draws.last().cloned().unwrap_or_default(),
            log_density_trace: vec![0.0; draws.len()],
            draws,
            acceptance_rate: 0.0,
            proposal_scale: Vec::new(),
            warning: None,
        }
    }

    /// One coordinate of every draw.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|t| t[j]).collect()
    }

    /// Standard error of the mean of coordinate `j` by non-overlapping
    /// batch means (`√k` batches).
    pub fn batch_means_se(&self, j: usize) -> f64 {
        let xs = self.coordinate(j);
        let batches = (xs.len() as f64).sqrt().floor().max(1.0) as usize;
        let size = xs.len() / batches;
        if size == 0 {
            return f64::NAN;
        }
        let means: Vec<f64> = xs.chunks_exact(size).map(crate::numeric::mean).collect();
        crate::numeric::std_error(&means)
    }
}

/// Gaussian random-walk Metropolis on the box with uniform-prior support:
/// proposals leaving the box are rejected without evaluating the target.
/// Starts at the box centre. During burn-in the scale is halved or doubled
/// after each window whose acceptance falls outside `[0.2, 0.5]`; it is
/// frozen afterwards.
pub fn mh_sample<F>(log_density: F, bx: &ParamBox, config: &PosteriorConfig) -> Result<ChainResult>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let d = bx.dim();
    let widths = bx.widths();
    let mut scale = match &config.proposal_scale {
        Some(s) => {
            check_dim(d, s.len())?;
            s.clone()
        }
        None => widths.iter().map(|w| 0.05 * w).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = bx.center();
    let mut current = log_density(&state);
    let mut proposal = vec![0.0; d];

    let kept = (config.chain_length - config.burn_in).div_ceil(config.thin);
    let mut draws = Vec::with_capacity(kept);
    let mut trace = Vec::with_capacity(kept);
    let mut accepted_after = 0usize;
    let mut window_accepts = 0usize;

    for it in 0..config.chain_length {
        for ((p, s), (sc, w)) in proposal.iter_mut().zip(&state).zip(scale.iter().zip(&widths)) {
            let z: f64 = rng.sample(StandardNormal);
            // degenerate sides never move
            *p = if *w > 0.0 { s + z * sc } else { *s };
        }
        // one uniform per step keeps the stream layout independent of the path
        let u: f64 = rng.random();
        let mut accepted = false;
        if bx.contains(&proposal) {
            let cand = log_density(&proposal);
            if cand.is_finite() && (cand >= current || u.ln() < cand - current) {
                state.copy_from_slice(&proposal);
                current = cand;
                accepted = true;
            }
        }
        if it < config.burn_in {
            window_accepts += accepted as usize;
            if config.adapt && (it + 1) % ADAPT_WINDOW == 0 {
                let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
                for (s, w) in scale.iter_mut().zip(&widths) {
                    if rate < TARGET_ACCEPT.0 {
                        *s *= 0.5;
                    } else if rate > TARGET_ACCEPT.1 {
                        *s = (*s * 2.0).min(w.max(f64::MIN_POSITIVE));
                    }
                }
                window_accepts = 0;
            }
        } else {
            accepted_after += accepted as usize;
            if (it - config.burn_in) % config.thin == 0 {
                draws.push(state.clone());
                trace.push(current);
            }
        }
    }

    let steps = config.chain_length - config.burn_in;
    let acceptance_rate = accepted_after as f64 / steps as f64;
    let warning = if acceptance_rate < 0.01 {
        Some(format!("acceptance rate {acceptance_rate:.4} below 0.01; proposals too wide"))
    } else if acceptance_rate > 0.99 {
        Some(format!("acceptance rate {acceptance_rate:.4} above 0.99; proposals too narrow"))
    } else {
        None
    };
    Ok(ChainResult {
        draws,
        acceptance_rate,
        final_draw: state,
        log_density_trace: trace,
        proposal_scale: scale,
        warning,
    })
}
