//! Hypothesis class `f_θ = ⟨θ, φ(·)⟩` over a bounded parameter box, the loss
//! abstraction, and empirical risk.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A point of the input space. Vector inputs feed coordinate maps, labels
/// index a partition cell or a row of a tabulated basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Input {
    Point(Vec<f64>),
    Label(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureKind {
    /// `φ_j(x) = x_j`.
    RawCoordinates,
    /// `φ_j = 1{x ∈ A_j}`, inputs are cell labels.
    PartitionIndicators,
    /// `φ_j = 1{x ∈ A_j} / √p_j`, orthonormal under the cell law `p`.
    ScaledIndicators { probs: Vec<f64> },
    /// Row `k` of the table is `φ(x)` for the input labelled `k`.
    Tabulated { rows: Vec<Vec<f64>> },
}

/// The feature map `φ : X → R^d` with per-feature sup-norm bounds
/// `s_j ≥ sup_x |φ_j(x)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    kind: FeatureKind,
    d: usize,
    sup_norms: Vec<f64>,
    orthonormal: bool,
}

impl FeatureMap {
    /// Coordinate features with caller-supplied sup bounds (use `f64::INFINITY`
    /// for unbounded inputs).
    pub fn raw_coordinates(sup_norms: Vec<f64>) -> Result<Self> {
        if sup_norms.is_empty() {
            return Err(Error::config("feature map needs d >= 1"));
        }
        if sup_norms.iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::config("sup-norm bounds must be nonnegative"));
        }
        Ok(Self { d: sup_norms.len(), kind: FeatureKind::RawCoordinates, sup_norms, orthonormal: false })
    }

    pub fn partition_indicators(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::config("feature map needs d >= 1"));
        }
        Ok(Self { kind: FeatureKind::PartitionIndicators, d, sup_norms: vec![1.0; d], orthonormal: false })
    }

    pub fn scaled_indicators(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::config("feature map needs d >= 1"));
        }
        if probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::config("scaled indicators need cell probabilities in (0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("cell probabilities must sum to 1, got {total}")));
        }
        Ok(Self {
            d: probs.len(),
            sup_norms: probs.iter().map(|p| 1.0 / p.sqrt()).collect(),
            kind: FeatureKind::ScaledIndicators { probs },
            orthonormal: true,
        })
    }

    pub fn tabulated(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::config("tabulated basis needs at least one nonempty row"));
        }
        let mut sup_norms = vec![0.0f64; d];
        for row in &rows {
            check_dim(d, row.len())?;
            for (s, v) in sup_norms.iter_mut().zip(row) {
                if !v.is_finite() {
                    return Err(Error::config("tabulated basis values must be finite"));
                }
                *s = s.max(v.abs());
            }
        }
        Ok(Self { kind: FeatureKind::Tabulated { rows }, d, sup_norms, orthonormal: false })
    }

    /// Declares (or revokes) orthonormality under the input law, which the
    /// projection estimator requires.
    pub fn with_orthonormal(mut self, orthonormal: bool) -> Self {
        self.orthonormal = orthonormal;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    pub fn sup_norms(&self) -> &[f64] {
        &self.sup_norms
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// True when exactly one feature is nonzero at every input.
    pub fn is_single_active(&self) -> bool {
        matches!(self.kind, FeatureKind::PartitionIndicators | FeatureKind::ScaledIndicators { .. })
    }

    pub fn eval_into(&self, x: &Input, out: &mut [f64]) -> Result<()> {
        check_dim(self.d, out.len())?;
        match (&self.kind, x) {
            (FeatureKind::RawCoordinates, Input::Point(p)) => {
                check_dim(self.d, p.len())?;
                out.copy_from_slice(p);
            }
            (FeatureKind::PartitionIndicators, Input::Label(k)) => {
                let k = self.cell(*k)?;
                out.fill(0.0);
                out[k] = 1.0;
            }
            (FeatureKind::ScaledIndicators { probs }, Input::Label(k)) => {
                let k = self.cell(*k)?;
                out.fill(0.0);
                out[k] = 1.0 / probs[k].sqrt();
            }
            (FeatureKind::Tabulated { rows }, Input::Label(k)) => {
                let row = rows.get(*k).ok_or_else(|| {
                    Error::config(format!("label {k} outside tabulated basis of {} rows", rows.len()))
                })?;
                out.copy_from_slice(row);
            }
            (_, x) => {
                return Err(Error::config(format!("input {x:?} does not match feature map kind {:?}", self.kind)))
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &Input) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// The `n × d` design matrix `(φ_j(X_i))`.
    pub fn design_matrix(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        let mut x = DMatrix::zeros(data.len(), self.d);
        let mut row = vec![0.0; self.d];
        for (i, input) in data.inputs().iter().enumerate() {
            self.eval_into(input, &mut row)?;
            for (j, v) in row.iter().enumerate() {
                x[(i, j)] = *v;
            }
        }
        Ok(x)
    }

    fn cell(&self, k: usize) -> Result<usize> {
        if k < self.d {
            Ok(k)
        } else {
            Err(Error::config(format!("cell label {k} outside partition of {} cells", self.d)))
        }
    }
}

/// Axis-aligned parameter box `Θ = [lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawBox> for ParamBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        ParamBox::new(raw.lo, raw.hi)
    }
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::config("parameter box needs d >= 1"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite()) || l > h {
                return Err(Error::config(format!("invalid box side [{l}, {h}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lo.iter().zip(&self.hi)).all(|(t, (l, h))| *l <= *t && *t <= *h)
    }

    /// Euclidean projection, i.e. coordinatewise clipping.
    pub fn project(&self, theta: &mut [f64]) {
        for (t, (l, h)) in theta.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *t = t.clamp(*l, *h);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
    }

    /// All `2^d` corners, in binary counting order.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| (0..d).map(|j| if mask >> j & 1 == 1 { self.hi[j] } else { self.lo[j] }).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub theta: Vec<f64>,
}

impl LinearModel {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(d: usize) -> Self {
        Self { theta: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// `n` input/output pairs with finite outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    inputs: Vec<Input>,
    outputs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    inputs: Vec<Input>,
    outputs: Vec<f64>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        Dataset::new(raw.inputs, raw.outputs)
    }
}

impl Dataset {
    pub fn new(inputs: Vec<Input>, outputs: Vec<f64>) -> Result<Self> {
        check_dim(inputs.len(), outputs.len())?;
        if let Some(y) = outputs.iter().find(|y| !y.is_finite()) {
            return Err(Error::config(format!("non-finite output {y}")));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn inputs(&self) -> &[Input] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn output_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.outputs)
    }
}

/// A loss `ℓ̃(y, y')` for predicting `y'` when the truth is `y`, with
/// curvature bounds `b1 ≤ ∂²ℓ̃/∂y'² ≤ b2`.
pub trait Loss: Sync {
    fn value(&self, y: f64, prediction: f64) -> f64;
    fn derivative(&self, y: f64, prediction: f64) -> f64;
    fn curvature_bounds(&self) -> (f64, f64);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LeastSquares;

impl Loss for LeastSquares {
    fn value(&self, y: f64, prediction: f64) -> f64 {
        let r = y - prediction;
        r * r
    }

    fn derivative(&self, y: f64, prediction: f64) -> f64 {
        2.0 * (prediction - y)
    }

    fn curvature_bounds(&self) -> (f64, f64) {
        (2.0, 2.0)
    }
}

pub fn predict(model: &LinearModel, fmap: &FeatureMap, x: &Input) -> Result<f64> {
    check_dim(fmap.dim(), model.dim())?;
    let phi = fmap.eval(x)?;
    Ok(crate::numeric::dot(&model.theta, &phi))
}

/// `(1/n) Σ ℓ̃(Y_i, f_θ(X_i))`.
pub fn empirical_risk(model: &LinearModel, fmap: &FeatureMap, data: &Dataset, loss: &dyn Loss) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::config("empirical risk of an empty dataset"));
    }
    check_dim(fmap.dim(), model.dim())?;
    let mut phi = vec![0.0; fmap.dim()];
    let mut total = 0.0;
    for (x, &y) in data.inputs().iter().zip(data.outputs()) {
        fmap.eval_into(x, &mut phi)?;
        total += loss.value(y, crate::numeric::dot(&model.theta, &phi));
    }
    Ok(total / data.len() as f64)
}

/// Upper bound `H` on `sup_{θ,θ'∈Θ, x} |f_θ(x) − f_θ'(x)|`. Exact for maps
/// with a single active feature, `Σ_j (hi_j − lo_j) s_j` otherwise.
pub fn linf_diameter_bound(bx: &ParamBox, fmap: &FeatureMap) -> Result<f64> {
    check_dim(fmap.dim(), bx.dim())?;
    // zero width contributes nothing even when s_j is unbounded
    let terms = bx.widths().into_iter().zip(fmap.sup_norms()).map(|(w, s)| if w == 0.0 { 0.0 } else { w * s });
    Ok(if fmap.is_single_active() { terms.fold(0.0, f64::max) } else { terms.sum() })
}

pub fn project_to_box(theta: &[f64], bx: &ParamBox) -> Result<Vec<f64>> {
    check_dim(bx.dim(), theta.len())?;
    let mut out = theta.to_vec();
    bx.project(&mut out);
    Ok(out)
}
