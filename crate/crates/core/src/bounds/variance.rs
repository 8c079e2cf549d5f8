use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::ParamBox;
use crate::synthetic::DistributionSpec;

/// `V = (2σ + H)²`.
pub fn lemma36_v(sigma: f64, h: f64) -> Result<f64> {
    if !(sigma >= 0.0 && h >= 0.0) {
        return Err(Error::config(format!("sigma and H must be >= 0 (got {sigma}, {h})")));
    }
    Ok((2.0 * sigma + h).powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma34 {
    /// Smallest admissible `η = (λA²/(2b1)) exp(M² exp(H b2/A))`.
    pub eta: f64,
    /// `η < 1`, i.e. the exponential-moment condition is usable.
    pub usable: bool,
}

pub fn lemma34_eta(lambda: f64, a: f64, m: f64, h: f64, b1: f64, b2: f64) -> Result<Lemma34> {
    if !(a > 0.0 && m > 0.0 && h >= 0.0 && b1 > 0.0 && b2 >= b1) {
        return Err(Error::config("need A, M, b1 > 0, H >= 0 and b2 >= b1"));
    }
    if !(lambda > 0.0 && 2.0 * a * h * lambda <= 1.0) {
        return Err(Error::config(format!(
            "lambda = {lambda} must lie in (0, 1/(2AH)] = (0, {}]",
            1.0 / (2.0 * a * h)
        )));
    }
    let eta = lambda * a * a / (2.0 * b1) * (m * m * (h * b2 / a).exp()).exp();
    Ok(Lemma34 { eta, usable: eta < 1.0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lemma37Config {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for Lemma37Config {
    fn default() -> Self {
        Self { restarts: 32, max_iter: 2_000, tol: 1e-13, seed: 0x56_3337 }
    }
}

/// The variance constant built from two suprema over the `Q`-unit sphere
/// `{f ∈ F_lin : E f² = 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma37 {
    /// `sup E[f² (Y − f*)²]`, the top generalized eigenvalue of `(M, Q)`.
    pub weighted_variance: f64,
    /// `sup_{f', f'' ∈ F} E[(f' − f'')²]`.
    pub diameter_sq: f64,
    /// `sup E f⁴` found by multi-start ascent; a lower bound up to restart
    /// coverage.
    pub fourth_moment: f64,
    pub v: f64,
}

/// `Q^{−1/2}` for a positive definite `Q`.
fn inverse_sqrt(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(q.clone());
    let top = eig.eigenvalues.max();
    if eig.eigenvalues.min() <= 1e-12 * top.max(f64::MIN_POSITIVE) {
        return Err(Error::config("Gram matrix is singular; the generalized eigenproblem is undefined"));
    }
    let inv = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose())
}

/// `max_{±w} ΔᵀQΔ` over the corners of the difference box `[−w, w]`.
pub(crate) fn max_quadratic_on_difference_box(q: &DMatrix<f64>, widths: &[f64]) -> f64 {
    let d = widths.len();
    (0..1usize << d)
        .map(|mask| {
            let delta =
                DVector::from_iterator(d, (0..d).map(|j| if mask >> j & 1 == 1 { widths[j] } else { -widths[j] }));
            delta.dot(&(q * &delta))
        })
        .fold(0.0, f64::max)
}

/// Projected gradient ascent of `E⟨v, φ⟩⁴` over `vᵀQv = 1`, run in the
/// whitened coordinates `u = Q^{1/2} v` on the unit sphere.
fn sup_fourth_moment(spec: &DistributionSpec, q_isqrt: &DMatrix<f64>, cfg: &Lemma37Config) -> Result<f64> {
    let d = q_isqrt.nrows();
    let value = |u: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let v = q_isqrt * u;
        let (f, g) = spec.feature_fourth_moment(v.as_slice())?;
        Ok((f, q_isqrt * DVector::from_vec(g)))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = 0.0f64;
    let mut starts: Vec<DVector<f64>> = (0..d)
        .map(|j| {
            let mut e = DVector::zeros(d);
            e[j] = 1.0;
            e
        })
        .collect();
    while starts.len() < cfg.restarts.max(d) {
        let z: DVector<f64> = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let norm = z.norm();
        if norm > 0.0 {
            starts.push(z / norm);
        }
    }
    for mut u in starts {
        let (mut f, mut g) = value(&u)?;
        let mut step = 1.0 / f.max(1e-12);
        for _ in 0..cfg.max_iter {
            // tangent component of the gradient
            let tangent = &g - &u * u.dot(&g);
            if tangent.norm() <= cfg.tol * g.norm().max(1.0) {
                break;
            }
            let mut improved = false;
            while step > 1e-20 {
                let cand = (&u + &tangent * step).normalize();
                let (fc, gc) = value(&cand)?;
                if fc > f {
                    improved = fc - f > cfg.tol * f.abs();
                    u = cand;
                    f = fc;
                    g = gc;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.max(f);
    }
    Ok(best)
}

/// `V = [2√(sup E f²(Y−f*)²) + √(sup E(f′−f″)²) √(sup E f⁴)]²`, with `f*`
/// the linear predictor `theta_star`.
pub fn lemma37_v(spec: &DistributionSpec, bx: &ParamBox, theta_star: &[f64], cfg: &Lemma37Config) -> Result<Lemma37> {
    check_dim(spec.dim(), bx.dim())?;
    let moments = spec.moments()?;
    let m = spec.residual_moment_matrix(theta_star)?;
    let q_isqrt = inverse_sqrt(&moments.q)?;
    let whitened = &q_isqrt * m * &q_isqrt;
    let weighted_variance = SymmetricEigen::new((&whitened + whitened.transpose()) * 0.5).eigenvalues.max().max(0.0);
    let diameter_sq = max_quadratic_on_difference_box(&moments.q, &bx.widths());
    let fourth_moment = sup_fourth_moment(spec, &q_isqrt, cfg)?;
    let v = (2.0 * weighted_variance.sqrt() + diameter_sq.sqrt() * fourth_moment.sqrt()).powi(2);
    Ok(Lemma37 { weighted_variance, diameter_sq, fourth_moment, v })
}
