//! Projected gradient descent for box-constrained convex quadratics
//! `θᵀAθ − 2⟨b, θ⟩` with `A` symmetric positive semidefinite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::model::ParamBox;

pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct BoxQpSolution {
    pub theta: Vec<f64>,
    pub iterations: usize,
    /// Norm of the gradient mapping `L(θ − P(θ − ∇/L))` at `theta`.
    pub pg_norm: f64,
}

pub fn largest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Minimizes `θᵀAθ − 2⟨b, θ⟩` over the box with fixed step `1/L`,
/// `L = 2 λ_max(A)`, starting at the box centre. Stops once the gradient
/// mapping norm is at most `tol`.
pub fn minimize_box_quadratic(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    bx: &ParamBox,
    tol: f64,
    max_iter: usize,
) -> Result<BoxQpSolution> {
    let d = bx.dim();
    check_dim(d, a.nrows())?;
    check_dim(d, a.ncols())?;
    check_dim(d, b.len())?;
    if !(tol > 0.0) {
        return Err(Error::config(format!("tolerance must be positive, got {tol}")));
    }
    let lipschitz = 2.0 * largest_eigenvalue(a).max(0.0);
    let mut theta = DVector::from_vec(bx.center());
    if lipschitz == 0.0 {
        // linear objective: each coordinate runs to the side the gradient points away from
        for j in 0..d {
            if b[j] > 0.0 {
                theta[j] = bx.hi()[j];
            } else if b[j] < 0.0 {
                theta[j] = bx.lo()[j];
            }
        }
        return Ok(BoxQpSolution { theta: theta.as_slice().to_vec(), iterations: 1, pg_norm: 0.0 });
    }
    let step = 1.0 / lipschitz;
    let mut next = theta.clone();
    let mut pg_norm = f64::INFINITY;
    for it in 0..max_iter {
        let grad = 2.0 * (a * &theta - b);
        next.copy_from(&(&theta - step * grad));
        bx.project(next.as_mut_slice());
        pg_norm = lipschitz * (&theta - &next).norm();
        if pg_norm <= tol {
            return Ok(BoxQpSolution { theta: theta.as_slice().to_vec(), iterations: it, pg_norm });
        }
        std::mem::swap(&mut theta, &mut next);
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: pg_norm, best: theta.as_slice().to_vec() })
}
