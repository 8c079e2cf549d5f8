//! Robust linear least-squares regression through soft-truncated
//! PAC-Bayesian posteriors, with classical baselines, synthetic laws with
//! exact risk oracles, explicit deviation-bound constants and a replicated
//! experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod posterior;
pub mod qp;
pub mod synthetic;
pub mod truncation;

pub use error::{Error, Result};
pub use model::{
    empirical_risk, linf_diameter_bound, predict, project_to_box, Dataset, FeatureKind, FeatureMap, Input,
    LeastSquares, LinearModel, Loss, ParamBox,
};
pub use truncation::{soft_trunc, soft_trunc_mirrored, Truncation};
