//! Classical comparison estimators: least squares, its clipped version,
//! ridge, the projection estimator and box-constrained empirical risk
//! minimization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{predict, Dataset, FeatureMap, Input, LinearModel, ParamBox};
use crate::qp::{minimize_box_quadratic, DEFAULT_MAX_ITER};

pub const DEFAULT_ERM_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub model: LinearModel,
    pub rank: usize,
}

impl OlsFit {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.model.dim()
    }
}

/// Relative singular-value cutoff used for ranks and the pseudoinverse.
fn svd_cutoff(x: &DMatrix<f64>, top: f64) -> f64 {
    f64::EPSILON * x.nrows().max(x.ncols()) as f64 * top
}

/// Minimal-norm least squares `X⁺Y`.
pub fn ols_fit(data: &Dataset, fmap: &FeatureMap) -> Result<OlsFit> {
    if data.is_empty() {
        return Err(Error::config("least squares on an empty dataset"));
    }
    let x = fmap.design_matrix(data)?;
    let y = data.output_vector();
    let svd = x.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(OlsFit { model: LinearModel::zeros(fmap.dim()), rank: 0 });
    }
    let eps = svd_cutoff(&x, top);
    let rank = svd.rank(eps);
    let theta = svd.solve(&y, eps).map_err(|e| Error::config(e.to_string()))?;
    Ok(OlsFit { model: LinearModel::new(theta.as_slice().to_vec()), rank })
}

/// `x ↦ (f_θ(x) ∧ H) ∨ −H`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedPredictor {
    pub model: LinearModel,
    pub h: f64,
}

impl TruncatedPredictor {
    pub fn predict(&self, fmap: &FeatureMap, x: &Input) -> Result<f64> {
        Ok(predict(&self.model, fmap, x)?.clamp(-self.h, self.h))
    }
}

pub fn truncate_predictor(model: LinearModel, h: f64) -> Result<TruncatedPredictor> {
    if !(h > 0.0) {
        return Err(Error::config(format!("clipping level must be positive, got {h}")));
    }
    Ok(TruncatedPredictor { model, h })
}

/// `(XᵀX/n + λI)⁻¹ XᵀY/n`; `λ = 0` falls back to [`ols_fit`].
pub fn ridge_fit(data: &Dataset, fmap: &FeatureMap, lambda: f64) -> Result<LinearModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("ridge penalty must be nonnegative, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(ols_fit(data, fmap)?.model);
    }
    if data.is_empty() {
        return Err(Error::config("ridge on an empty dataset"));
    }
    let (gram, cross) = normal_equations(data, fmap)?;
    let d = fmap.dim();
    let a = gram + DMatrix::identity(d, d) * lambda;
    let chol = a.cholesky().ok_or_else(|| Error::config("ridge system is not positive definite"))?;
    Ok(LinearModel::new(chol.solve(&cross).as_slice().to_vec()))
}

/// `θ̂_j = (1/n) Σ_i Y_i φ_j(X_i)`; the basis must be declared orthonormal.
pub fn projection_fit(data: &Dataset, fmap: &FeatureMap) -> Result<LinearModel> {
    if !fmap.is_orthonormal() {
        return Err(Error::config("projection estimator needs a basis declared orthonormal"));
    }
    if data.is_empty() {
        return Err(Error::config("projection estimator on an empty dataset"));
    }
    let (_, cross) = normal_equations(data, fmap)?;
    Ok(LinearModel::new(cross.as_slice().to_vec()))
}

/// Empirical risk minimizer over the box by projected gradient descent on
/// `r(θ) = θᵀ(XᵀX/n)θ − 2θᵀXᵀY/n + const`.
pub fn erm_box_fit(data: &Dataset, fmap: &FeatureMap, bx: &ParamBox, tol: f64) -> Result<LinearModel> {
    crate::error::check_dim(fmap.dim(), bx.dim())?;
    if data.is_empty() {
        return Err(Error::config("empirical risk minimization on an empty dataset"));
    }
    let (gram, cross) = normal_equations(data, fmap)?;
    let sol = minimize_box_quadratic(&gram, &cross, bx, tol, DEFAULT_MAX_ITER)?;
    Ok(LinearModel::new(sol.theta))
}

/// `(XᵀX/n, XᵀY/n)`.
pub fn normal_equations(data: &Dataset, fmap: &FeatureMap) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = fmap.dim();
    let n = data.len() as f64;
    let mut gram = DMatrix::zeros(d, d);
    let mut cross = DVector::zeros(d);
    let mut phi = vec![0.0; d];
    for (x, y) in data.inputs().iter().zip(data.outputs()) {
        fmap.eval_into(x, &mut phi)?;
        for j in 0..d {
            if phi[j] == 0.0 {
                continue;
            }
            cross[j] += y * phi[j];
            for k in 0..d {
                gram[(j, k)] += phi[j] * phi[k];
            }
        }
    }
    Ok((gram / n, cross / n))
}
