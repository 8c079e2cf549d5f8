//! Synthetic data laws with closed-form moment oracles, so that true risk
//! `R(θ) = c0 − 2⟨θ, b⟩ + θᵀQθ` and excess risk are exact.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{Dataset, FeatureMap, Input, LinearModel, ParamBox};
use crate::qp::{minimize_box_quadratic, DEFAULT_MAX_ITER};

/// Additive output noise, independent of the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Noise {
    Gaussian {
        sd: f64,
    },
    /// `scale · T` with `T` Student-t with `nu` degrees of freedom.
    StudentT {
        nu: f64,
        scale: f64,
    },
}

impl Noise {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Noise::Gaussian { sd } if !(sd >= 0.0 && sd.is_finite()) => {
                Err(Error::config(format!("gaussian noise sd must be finite and >= 0, got {sd}")))
            }
            Noise::StudentT { nu, .. } if !(nu > 2.0 && nu.is_finite()) => {
                Err(Error::config(format!("student-t noise needs nu > 2 for a finite variance, got {nu}")))
            }
            Noise::StudentT { scale, .. } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::config(format!("student-t scale must be positive, got {scale}")))
            }
            _ => Ok(()),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Noise::Gaussian { sd } => sd * sd,
            Noise::StudentT { nu, scale } if nu > 2.0 => scale * scale * nu / (nu - 2.0),
            Noise::StudentT { .. } => f64::INFINITY,
        }
    }

    /// `E ε⁴`, infinite for Student-t with `nu ≤ 4`.
    pub fn fourth_moment(&self) -> f64 {
        match *self {
            Noise::Gaussian { sd } => 3.0 * sd.powi(4),
            Noise::StudentT { nu, scale } if nu > 4.0 => scale.powi(4) * 3.0 * nu * nu / ((nu - 2.0) * (nu - 4.0)),
            Noise::StudentT { .. } => f64::INFINITY,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::Gaussian { sd } => {
                let z: f64 = rng.sample(StandardNormal);
                sd * z
            }
            Noise::StudentT { nu, scale } => {
                // validated nu > 2, so the distribution exists
                scale * StudentT::new(nu).expect("validated degrees of freedom").sample(rng)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionBasis {
    /// `φ_j = 1{X ∈ A_j}`.
    #[default]
    Indicators,
    /// `φ_j = 1{X ∈ A_j}/√p_j`, orthonormal under the cell law.
    Scaled,
}

/// A synthetic law of `(X, Y)` together with its feature map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// `X ~ N(0, Σ)` with raw-coordinate features and
    /// `Y = ⟨θ°, X⟩ + κ (X_1² − Σ_11) + ε`.
    GaussianDesign {
        cov: Vec<Vec<f64>>,
        theta0: Vec<f64>,
        #[serde(default)]
        misspec: f64,
        noise: Noise,
    },
    /// Cells `A_j` with probabilities `p_j` and `Y = θ° + ε` independent of
    /// the cell.
    PartitionDesign {
        probs: Vec<f64>,
        theta0: f64,
        noise: Noise,
        #[serde(default)]
        basis: PartitionBasis,
    },
    /// Two cells with `P(X_1) = 1 − β`; `Y = 0` on `X_1` and `Y = ±1/√β`
    /// on `X_2` with `P(+) = (1 + σ√β)/2`, `σ = sign`.
    Hypercube { beta: f64, sign: i8 },
}

/// The exact second moments `Q = E φφᵀ`, `b = E Yφ`, `c0 = E Y²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c0: f64,
}

impl Moments {
    pub fn risk(&self, theta: &[f64]) -> f64 {
        let t = DVector::from_column_slice(theta);
        self.c0 - 2.0 * t.dot(&self.b) + t.dot(&(&self.q * &t))
    }
}

/// Exact risk with the best-in-class reference point `θ*` and `R* = R(θ*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskOracle {
    pub moments: Moments,
    pub theta_star: Vec<f64>,
    pub r_star: f64,
}

impl RiskOracle {
    /// `θ*` minimizes the risk over the box.
    pub fn constrained(moments: Moments, bx: &ParamBox, tol: f64) -> Result<Self> {
        let (theta_star, r_star) = constrained_fstar(&moments, bx, tol)?;
        Ok(Self { moments, theta_star, r_star })
    }

    /// `θ*` is the minimal-norm minimizer over all of `R^d`.
    pub fn unconstrained(moments: Moments) -> Result<Self> {
        let svd = moments.q.clone().svd(true, true);
        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let eps = f64::EPSILON * moments.q.nrows() as f64 * top.max(f64::MIN_POSITIVE);
        let theta = svd.solve(&moments.b, eps).map_err(|e| Error::config(e.to_string()))?;
        let theta_star = theta.as_slice().to_vec();
        let r_star = moments.risk(&theta_star);
        Ok(Self { moments, theta_star, r_star })
    }

    pub fn exact_risk(&self, theta: &[f64]) -> f64 {
        self.moments.risk(theta)
    }

    pub fn excess_risk(&self, theta: &[f64]) -> f64 {
        self.exact_risk(theta) - self.r_star
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }
}

/// Projected gradient on the exact quadratic risk over the box.
pub fn constrained_fstar(moments: &Moments, bx: &ParamBox, tol: f64) -> Result<(Vec<f64>, f64)> {
    let sol = minimize_box_quadratic(&moments.q, &moments.b, bx, tol, DEFAULT_MAX_ITER)?;
    let r = moments.risk(&sol.theta);
    Ok((sol.theta, r))
}

impl DistributionSpec {
    /// The hypercube pair `(P_−, P_+)` with `β = 1/(2√n)`.
    pub fn hypercube_pair(n: usize) -> Result<(Self, Self)> {
        if n == 0 {
            return Err(Error::config("hypercube construction needs n >= 1"));
        }
        let beta = 1.0 / (2.0 * (n as f64).sqrt());
        Ok((Self::Hypercube { beta, sign: -1 }, Self::Hypercube { beta, sign: 1 }))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GaussianDesign { cov, theta0, misspec, noise } => {
                let d = theta0.len();
                if d == 0 {
                    return Err(Error::config("gaussian design needs d >= 1"));
                }
                check_dim(d, cov.len())?;
                for row in cov {
                    check_dim(d, row.len())?;
                }
                let c = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
                if c.iter().any(|v| !v.is_finite()) || (&c - c.transpose()).abs().max() > 1e-12 * (1.0 + c.abs().max())
                {
                    return Err(Error::config("covariance must be finite and symmetric"));
                }
                let min_eig = SymmetricEigen::new(c.clone()).eigenvalues.min();
                if min_eig < -1e-12 * (1.0 + c.abs().max()) {
                    return Err(Error::config(format!(
                        "covariance is not positive semidefinite (eigenvalue {min_eig})"
                    )));
                }
                if theta0.iter().any(|v| !v.is_finite()) || !misspec.is_finite() {
                    return Err(Error::config("regression coefficients must be finite"));
                }
                noise.validate()
            }
            Self::PartitionDesign { probs, theta0, noise, basis } => {
                if probs.is_empty() {
                    return Err(Error::config("partition design needs at least one cell"));
                }
                if probs.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
                    return Err(Error::config("cell probabilities must lie in [0, 1]"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!("cell probabilities sum to {total}, not 1")));
                }
                if *basis == PartitionBasis::Scaled && probs.contains(&0.0) {
                    return Err(Error::config("scaled indicators need every cell probability > 0"));
                }
                if !theta0.is_finite() {
                    return Err(Error::config("cell mean must be finite"));
                }
                noise.validate()
            }
            Self::Hypercube { beta, sign } => {
                if !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(Error::config(format!("hypercube beta must lie in (0, 1], got {beta}")));
                }
                if sign.abs() != 1 {
                    return Err(Error::config(format!("hypercube sign must be -1 or 1, got {sign}")));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianDesign { theta0, .. } => theta0.len(),
            Self::PartitionDesign { probs, .. } => probs.len(),
            Self::Hypercube { .. } => 2,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::GaussianDesign { .. } => "gaussian-design",
            Self::PartitionDesign { .. } => "partition-design",
            Self::Hypercube { .. } => "hypercube",
        }
    }

    pub fn feature_map(&self) -> Result<FeatureMap> {
        self.validate()?;
        match self {
            Self::GaussianDesign { theta0, .. } => FeatureMap::raw_coordinates(vec![f64::INFINITY; theta0.len()]),
            Self::PartitionDesign { probs, basis: PartitionBasis::Indicators, .. } => {
                // orthogonal only up to the p_j weights
                FeatureMap::partition_indicators(probs.len())
            }
            Self::PartitionDesign { probs, basis: PartitionBasis::Scaled, .. } => {
                FeatureMap::scaled_indicators(probs.clone())
            }
            Self::Hypercube { .. } => FeatureMap::partition_indicators(2),
        }
    }

    fn cov_matrix(cov: &[Vec<f64>]) -> DMatrix<f64> {
        let d = cov.len();
        DMatrix::from_fn(d, d, |i, j| cov[i][j])
    }

    pub fn moments(&self) -> Result<Moments> {
        self.validate()?;
        Ok(match self {
            Self::GaussianDesign { cov, theta0, misspec, noise } => {
                let s = Self::cov_matrix(cov);
                let t = DVector::from_column_slice(theta0);
                let b = &s * &t;
                let c0 = t.dot(&b) + 2.0 * misspec * misspec * s[(0, 0)].powi(2) + noise.variance();
                Moments { q: s, b, c0 }
            }
            Self::PartitionDesign { probs, theta0, noise, basis } => {
                let d = probs.len();
                let (q, b) = match basis {
                    PartitionBasis::Indicators => (
                        DMatrix::from_diagonal(&DVector::from_column_slice(probs)),
                        DVector::from_iterator(d, probs.iter().map(|p| p * theta0)),
                    ),
                    PartitionBasis::Scaled => {
                        (DMatrix::identity(d, d), DVector::from_iterator(d, probs.iter().map(|p| p.sqrt() * theta0)))
                    }
                };
                Moments { q, b, c0: theta0 * theta0 + noise.variance() }
            }
            Self::Hypercube { beta, sign } => Moments {
                q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 - beta, *beta])),
                b: DVector::from_vec(vec![0.0, beta * f64::from(*sign)]),
                c0: 1.0,
            },
        })
    }

    pub fn risk_oracle(&self, bx: &ParamBox, tol: f64) -> Result<RiskOracle> {
        check_dim(self.dim(), bx.dim())?;
        RiskOracle::constrained(self.moments()?, bx, tol)
    }

    pub fn exact_risk(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(self.moments()?.risk(theta))
    }

    /// `E Y`.
    pub fn output_mean(&self) -> f64 {
        match self {
            Self::GaussianDesign { .. } => 0.0,
            Self::PartitionDesign { theta0, .. } => *theta0,
            Self::Hypercube { beta, sign } => beta * f64::from(*sign),
        }
    }

    /// `Var(Y)`, the marginal output variance.
    pub fn marginal_variance(&self) -> Result<f64> {
        let m = self.output_mean();
        Ok(self.moments()?.c0 - m * m)
    }

    /// `E[(Y − E[Y|X])²]`, the average conditional variance.
    pub fn noise_variance(&self) -> f64 {
        match self {
            Self::GaussianDesign { noise, .. } | Self::PartitionDesign { noise, .. } => noise.variance(),
            Self::Hypercube { beta, .. } => beta * (1.0 / beta - 1.0),
        }
    }

    /// `E[Y | X = x]`.
    pub fn regression_function(&self, x: &Input) -> Result<f64> {
        match (self, x) {
            (Self::GaussianDesign { cov, theta0, misspec, .. }, Input::Point(p)) => {
                check_dim(theta0.len(), p.len())?;
                Ok(crate::numeric::dot(theta0, p) + misspec * (p[0] * p[0] - cov[0][0]))
            }
            (Self::PartitionDesign { probs, theta0, .. }, Input::Label(k)) if *k < probs.len() => Ok(*theta0),
            (Self::Hypercube { .. }, Input::Label(0)) => Ok(0.0),
            (Self::Hypercube { sign, .. }, Input::Label(1)) => Ok(f64::from(*sign)),
            _ => Err(Error::config(format!("input {x:?} is outside the {} input space", self.variant_name()))),
        }
    }

    /// `sup_x E[(Y − f_θ(X))² | X = x]` for the linear predictor `θ`
    /// (typically `θ*`). Infinite when the gap to the regression function is
    /// unbounded.
    pub fn sigma_sup_conditional(&self, theta: &[f64]) -> Result<f64> {
        self.validate()?;
        check_dim(self.dim(), theta.len())?;
        Ok(match self {
            Self::GaussianDesign { theta0, misspec, noise, .. } => {
                let well_specified = *misspec == 0.0 && theta0.iter().zip(theta).all(|(a, b)| a == b);
                if well_specified {
                    noise.variance()
                } else {
                    f64::INFINITY
                }
            }
            Self::PartitionDesign { probs, theta0, noise, basis } => {
                let s2 = noise.variance();
                probs
                    .iter()
                    .zip(theta)
                    .filter(|(p, _)| **p > 0.0)
                    .map(|(p, t)| {
                        let pred = match basis {
                            PartitionBasis::Indicators => *t,
                            PartitionBasis::Scaled => t / p.sqrt(),
                        };
                        s2 + (theta0 - pred).powi(2)
                    })
                    .fold(0.0, f64::max)
            }
            Self::Hypercube { beta, sign } => {
                let on_x1 = theta[0] * theta[0];
                let on_x2 = 1.0 / beta - 2.0 * f64::from(*sign) * theta[1] + theta[1] * theta[1];
                if *beta < 1.0 {
                    on_x1.max(on_x2)
                } else {
                    on_x2
                }
            }
        })
    }

    /// `M = E[φφᵀ (Y − f_θ(X))²]`. Needs a finite noise variance.
    pub fn residual_moment_matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.validate()?;
        check_dim(self.dim(), theta.len())?;
        if !self.noise_variance().is_finite() {
            return Err(Error::MomentUnavailable("E[φφᵀ(Y − f)²] needs a finite noise variance".into()));
        }
        Ok(match self {
            Self::GaussianDesign { cov, theta0, misspec, noise } => {
                let s = Self::cov_matrix(cov);
                let delta = DVector::from_iterator(theta0.len(), theta0.iter().zip(theta).map(|(a, b)| a - b));
                let sd = &s * &delta;
                let s11 = s[(0, 0)];
                let col = s.column(0).into_owned();
                // Isserlis: E[XXᵀ(δᵀX)²] = (δᵀΣδ)Σ + 2Σδδᵀ Σ and
                // E[XXᵀ(X_1² − Σ_11)²] = 2Σ_11² Σ + 8Σ_11 σ_1σ_1ᵀ
                &s * delta.dot(&sd)
                    + 2.0 * &sd * sd.transpose()
                    + &s * noise.variance()
                    + (&s * (2.0 * s11 * s11) + &col * col.transpose() * (8.0 * s11)) * (misspec * misspec)
            }
            Self::PartitionDesign { probs, theta0, noise, basis } => {
                let s2 = noise.variance();
                DMatrix::from_diagonal(&DVector::from_iterator(
                    probs.len(),
                    probs.iter().zip(theta).map(|(p, t)| match basis {
                        PartitionBasis::Indicators => p * (s2 + (theta0 - t).powi(2)),
                        PartitionBasis::Scaled => {
                            if *p > 0.0 {
                                s2 + (theta0 - t / p.sqrt()).powi(2)
                            } else {
                                0.0
                            }
                        }
                    }),
                ))
            }
            Self::Hypercube { beta, sign } => {
                let m2 = beta * (1.0 / beta - 2.0 * f64::from(*sign) * theta[1] + theta[1] * theta[1]);
                DMatrix::from_diagonal(&DVector::from_vec(vec![(1.0 - beta) * theta[0] * theta[0], m2]))
            }
        })
    }

    /// `E[⟨v, φ(X)⟩⁴]` and its gradient in `v`.
    pub fn feature_fourth_moment(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), v.len())?;
        Ok(match self {
            Self::GaussianDesign { cov, .. } => {
                let s = Self::cov_matrix(cov);
                let vv = DVector::from_column_slice(v);
                let sv = &s * &vv;
                let q = vv.dot(&sv);
                (3.0 * q * q, (sv * (12.0 * q)).as_slice().to_vec())
            }
            Self::PartitionDesign { probs, basis, .. } => {
                let w: Vec<f64> = match basis {
                    PartitionBasis::Indicators => probs.clone(),
                    PartitionBasis::Scaled => probs.iter().map(|p| 1.0 / p).collect(),
                };
                let val = w.iter().zip(v).map(|(w, x)| w * x.powi(4)).sum();
                (val, w.iter().zip(v).map(|(w, x)| 4.0 * w * x.powi(3)).collect())
            }
            Self::Hypercube { beta, .. } => {
                let w = [1.0 - beta, *beta];
                let val = w[0] * v[0].powi(4) + w[1] * v[1].powi(4);
                (val, vec![4.0 * w[0] * v[0].powi(3), 4.0 * w[1] * v[1].powi(3)])
            }
        })
    }

    /// Exact risk of the clipped predictor `(f_θ ∧ H) ∨ −H`. Only laws on
    /// finitely many cells have it in closed form.
    pub fn truncated_risk(&self, model: &LinearModel, h: f64) -> Result<f64> {
        check_dim(self.dim(), model.dim())?;
        let theta = &model.theta;
        match self {
            Self::PartitionDesign { probs, theta0, noise, basis } => Ok(probs
                .iter()
                .zip(theta)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, t)| {
                    let pred = match basis {
                        PartitionBasis::Indicators => *t,
                        PartitionBasis::Scaled => t / p.sqrt(),
                    }
                    .clamp(-h, h);
                    p * (noise.variance() + (theta0 - pred).powi(2))
                })
                .sum()),
            Self::Hypercube { beta, sign } => {
                let c1 = theta[0].clamp(-h, h);
                let c2 = theta[1].clamp(-h, h);
                Ok((1.0 - beta) * c1 * c1 + beta * (1.0 / beta - 2.0 * f64::from(*sign) * c2 + c2 * c2))
            }
            Self::GaussianDesign { .. } => Err(Error::MomentUnavailable(
                "clipped-predictor risk has no closed form under a gaussian design".into(),
            )),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        let mut inputs = Vec::with_capacity(n);
        let mut outputs = Vec::with_capacity(n);
        match self {
            Self::GaussianDesign { cov, theta0, misspec, noise } => {
                let root = covariance_root(&Self::cov_matrix(cov));
                let d = theta0.len();
                for _ in 0..n {
                    let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    let x = &root * z;
                    let y = x.dot(&DVector::from_column_slice(theta0))
                        + misspec * (x[0] * x[0] - cov[0][0])
                        + noise.sample(rng);
                    inputs.push(Input::Point(x.as_slice().to_vec()));
                    outputs.push(y);
                }
            }
            Self::PartitionDesign { probs, theta0, noise, .. } => {
                for _ in 0..n {
                    inputs.push(Input::Label(sample_cell(probs, rng.random())));
                    outputs.push(theta0 + noise.sample(rng));
                }
            }
            Self::Hypercube { beta, sign } => {
                let up = 0.5 * (1.0 + f64::from(*sign) * beta.sqrt());
                let level = 1.0 / beta.sqrt();
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    if u < 1.0 - beta {
                        inputs.push(Input::Label(0));
                        outputs.push(0.0);
                    } else {
                        inputs.push(Input::Label(1));
                        outputs.push(if v < up { level } else { -level });
                    }
                }
            }
        }
        Dataset::new(inputs, outputs)
    }
}

fn sample_cell(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (j, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last = j;
        }
        acc += p;
        if u < acc && *p > 0.0 {
            return j;
        }
    }
    last
}

/// A symmetric square root `Σ^{1/2}`; tolerates singular covariances.
fn covariance_root(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(s.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// A law plus the parameter box, the unit that spec files describe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(flatten)]
    pub law: DistributionSpec,
    #[serde(rename = "box")]
    pub bounds: ParamBox,
}

impl SpecFile {
    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        check_dim(self.law.dim(), self.bounds.dim())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1(noise: Noise) -> DistributionSpec {
        DistributionSpec::PartitionDesign {
            probs: vec![0.1, 0.2, 0.3, 0.4],
            theta0: 0.7,
            noise,
            basis: PartitionBasis::Indicators,
        }
    }

    fn gaussian_fixture(misspec: f64) -> DistributionSpec {
        DistributionSpec::GaussianDesign {
            cov: vec![vec![1.0, 0.3], vec![0.3, 0.5]],
            theta0: vec![0.8, -0.4],
            misspec,
            noise: Noise::Gaussian { sd: 0.5 },
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(example1(Noise::StudentT { nu: 2.0, scale: 1.0 }).validate().is_err());
        let bad = DistributionSpec::PartitionDesign {
            probs: vec![0.5, 0.5 + 1e-9],
            theta0: 0.0,
            noise: Noise::Gaussian { sd: 1.0 },
            basis: PartitionBasis::Indicators,
        };
        assert!(bad.validate().is_err());
        assert!(DistributionSpec::Hypercube { beta: 0.0, sign: 1 }.validate().is_err());
        assert!(DistributionSpec::Hypercube { beta: 1.5, sign: 1 }.validate().is_err());
        assert!(DistributionSpec::Hypercube { beta: 0.5, sign: 0 }.validate().is_err());
        let not_psd = DistributionSpec::GaussianDesign {
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            theta0: vec![0.0, 0.0],
            misspec: 0.0,
            noise: Noise::Gaussian { sd: 1.0 },
        };
        assert!(not_psd.validate().is_err());
        assert!(example1(Noise::Gaussian { sd: 1.0 }).sample(10, 1).is_ok());
    }

    #[test]
    fn degenerate_cell_and_determinism() {
        let spec = DistributionSpec::PartitionDesign {
            probs: vec![1.0, 0.0, 0.0],
            theta0: 1.0,
            noise: Noise::Gaussian { sd: 1.0 },
            basis: PartitionBasis::Indicators,
        };
        let data = spec.sample(500, 3).unwrap();
        assert!(data.inputs().iter().all(|x| *x == Input::Label(0)));
        assert_eq!(spec.sample(500, 3).unwrap(), data);
        assert_ne!(spec.sample(500, 4).unwrap(), data);
    }

    #[test]
    fn risk_examples() {
        let spec = example1(Noise::Gaussian { sd: 0.6 });
        let m = spec.moments().unwrap();
        assert!((m.risk(&[0.0; 4]) - m.c0).abs() < 1e-15);
        assert!((m.risk(&[0.7; 4]) - 0.36).abs() < 1e-12);
        let bx = ParamBox::cube(4, -1.0, 1.0).unwrap();
        let oracle = spec.risk_oracle(&bx, 1e-12).unwrap();
        assert!(oracle.excess_risk(&oracle.theta_star).abs() < 1e-15);
        // interior optimum: excess risk is the Q-norm of the gap
        let theta = [0.1, -0.3, 0.9, 0.5];
        let gap: f64 = [0.1, 0.2, 0.3, 0.4].iter().zip(&theta).map(|(p, t)| p * (t - 0.7f64).powi(2)).sum();
        assert!((oracle.excess_risk(&theta) - gap).abs() < 1e-12);
    }

    #[test]
    fn constrained_optimum_examples() {
        let m = Moments { q: DMatrix::from_element(1, 1, 1.0), b: DVector::from_element(1, 5.0), c0: 30.0 };
        let (t, r) = constrained_fstar(&m, &ParamBox::cube(1, -1.0, 1.0).unwrap(), 1e-10).unwrap();
        assert_eq!(t, vec![1.0]);
        assert!((r - (30.0 - 10.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments_include_misspecification() {
        let spec = gaussian_fixture(0.6);
        let m = spec.moments().unwrap();
        // c0 = θᵀΣθ + 2κ²Σ11² + s²
        let t = DVector::from_vec(vec![0.8, -0.4]);
        let want = t.dot(&(&m.q * &t)) + 2.0 * 0.36 + 0.25;
        assert!((m.c0 - want).abs() < 1e-14);
        assert_eq!(spec.sigma_sup_conditional(&[0.8, -0.4]).unwrap(), f64::INFINITY);
        assert!((gaussian_fixture(0.0).sigma_sup_conditional(&[0.8, -0.4]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn student_t_sigma_sup_formula() {
        let spec = DistributionSpec::PartitionDesign {
            probs: vec![0.5, 0.5],
            theta0: 0.2,
            noise: Noise::StudentT { nu: 5.0, scale: 2.0 },
            basis: PartitionBasis::Indicators,
        };
        assert!((spec.sigma_sup_conditional(&[0.2, 0.2]).unwrap() - 4.0 * 5.0 / 3.0).abs() < 1e-12);
        let mis = spec.sigma_sup_conditional(&[0.2, -0.3]).unwrap();
        assert!((mis - (20.0 / 3.0 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn hypercube_pair_examples() {
        let (minus, plus) = DistributionSpec::hypercube_pair(4).unwrap();
        for (spec, s) in [(minus, -1.0), (plus, 1.0)] {
            let DistributionSpec::Hypercube { beta, .. } = spec else { unreachable!() };
            assert_eq!(beta, 0.25);
            assert!((spec.noise_variance() - 0.75).abs() < 1e-15);
            assert!(spec.marginal_variance().unwrap() <= 1.0);
            assert_eq!(spec.regression_function(&Input::Label(1)).unwrap(), s);
            assert_eq!(spec.regression_function(&Input::Label(0)).unwrap(), 0.0);
            // f_reg = σφ_2 is in the box [−1, 1]², hence θ* = (0, σ)
            let oracle = spec.risk_oracle(&ParamBox::cube(2, -1.0, 1.0).unwrap(), 1e-12).unwrap();
            assert!((oracle.theta_star[1] - s).abs() < 1e-10 && oracle.theta_star[0].abs() < 1e-10);
            assert!((oracle.r_star - 0.75).abs() < 1e-10);
        }
    }

    #[test]
    fn spec_file_round_trip() {
        let spec = SpecFile {
            law: example1(Noise::StudentT { nu: 3.0, scale: 1.5 }),
            bounds: ParamBox::cube(4, -2.0, 2.0).unwrap(),
        };
        let text = spec.to_toml_string().unwrap();
        let back = SpecFile::from_toml_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_toml_string().unwrap(), text);
        let g = SpecFile { law: gaussian_fixture(0.3), bounds: ParamBox::cube(2, -1.0, 1.0).unwrap() };
        assert_eq!(SpecFile::from_toml_str(&g.to_toml_string().unwrap()).unwrap(), g);
        assert!(SpecFile::from_toml_str("variant = \"hypercube\"\nbeta = 0.5\nsign = 1\n[box]\nlo = [0]\nhi = [1]\n")
            .is_err());
        assert!(SpecFile::from_toml_str("variant = \"moon\"").is_err());
    }
}
