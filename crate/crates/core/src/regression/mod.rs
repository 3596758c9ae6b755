//! Regressors for the nonlinear part of the motion field.
//!
//! Three backends sit behind [`VectorField`]: Gaussian mixture regression,
//! RBF ridge regression and exact Gaussian-process regression. The stabilizer
//! only ever calls `predict`, so any other model can be plugged in by
//! implementing the trait.

mod gmr;
mod gp;
pub(crate) mod kmeans;
mod rbf;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, EsdsError, Result};

pub use gmr::{fit_gmr, GmrModel, GmrParams};
pub use gp::{fit_gp, GpModel, GpParams};
pub use rbf::{fit_rbf_ridge, fit_rbf_ridge_with_centers, RbfParams, RbfRidgeModel};

/// A fitted map from state to field value.
pub trait VectorField: Send + Sync {
    /// State dimension.
    fn dim(&self) -> usize;

    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Name used in diagnostics.
    fn backend(&self) -> &'static str {
        "custom"
    }
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).predict(x)
    }
    fn backend(&self) -> &'static str {
        (**self).backend()
    }
}

/// Wraps a closure as a [`VectorField`]; handy for analytic fields.
#[derive(Clone)]
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> std::fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnField").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, x.len())?;
        Ok((self.f)(x))
    }

    fn backend(&self) -> &'static str {
        "analytic"
    }
}

/// Supervised pairs: demonstrated states and the transformed velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<DVector<f64>>,
    targets: Vec<DVector<f64>>,
    dim: usize,
}

impl TrainingSet {
    pub fn new(inputs: Vec<DVector<f64>>, targets: Vec<DVector<f64>>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(EsdsError::InvalidParameter(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        if inputs.len() < 2 {
            return Err(EsdsError::InsufficientData("a training set needs at least 2 pairs".into()));
        }
        let dim = inputs[0].len();
        if dim == 0 {
            return Err(EsdsError::InvalidParameter("zero-dimensional state".into()));
        }
        for v in inputs.iter().chain(&targets) {
            check_dim(dim, v.len())?;
            if v.iter().any(|c| !c.is_finite()) {
                return Err(EsdsError::InvalidParameter("non-finite training value".into()));
            }
        }
        Ok(Self { inputs, targets, dim })
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[DVector<f64>] {
        &self.targets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Mean over coordinates of the per-coordinate target variance.
    pub fn target_variance(&self) -> f64 {
        mean_variance(&self.targets)
    }
}

pub(crate) fn mean_variance(points: &[DVector<f64>]) -> f64 {
    let n = points.len() as f64;
    let dim = points[0].len();
    let mean = points.iter().fold(DVector::zeros(dim), |acc, p| acc + p) / n;
    let var: f64 = points.iter().map(|p| (p - &mean).norm_squared()).sum::<f64>() / n;
    var / dim as f64
}

/// Median of pairwise Euclidean distances. Large inputs are strided down to
/// at most 1000 points so the cost stays bounded.
pub fn median_pairwise_distance(points: &[DVector<f64>]) -> f64 {
    let stride = points.len().div_ceil(1000).max(1);
    let pts: Vec<_> = points.iter().step_by(stride).collect();
    let mut d = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d.push((pts[i] - pts[j]).norm());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    d.select_nth_unstable_by(mid, f64::total_cmp);
    d[mid]
}

/// Any fitted backend.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionModel {
    Gmr(GmrModel),
    Rbf(RbfRidgeModel),
    Gp(GpModel),
}

impl VectorField for RegressionModel {
    fn dim(&self) -> usize {
        match self {
            Self::Gmr(m) => m.dim(),
            Self::Rbf(m) => m.dim(),
            Self::Gp(m) => m.dim(),
        }
    }

    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Self::Gmr(m) => m.predict(x),
            Self::Rbf(m) => m.predict(x),
            Self::Gp(m) => m.predict(x),
        }
    }

    fn backend(&self) -> &'static str {
        match self {
            Self::Gmr(_) => "gmr",
            Self::Rbf(_) => "rbf",
            Self::Gp(_) => "gp",
        }
    }
}

macro_rules! backend_field {
    ($ty:ty, $name:literal) => {
        impl VectorField for $ty {
            fn dim(&self) -> usize {
                <$ty>::dim(self)
            }

            fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
                <$ty>::predict(self, x)
            }

            fn backend(&self) -> &'static str {
                $name
            }
        }
    };
}

backend_field!(GmrModel, "gmr");
backend_field!(RbfRidgeModel, "rbf");
backend_field!(GpModel, "gp");

/// Current version of the JSON model document.
pub const MODEL_DOC_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    backend: String,
    version: u32,
    dim: usize,
    params: serde_json::Value,
}

impl RegressionModel {
    /// Serialise as `{"backend", "version", "dim", "params"}`.
    pub fn to_json(&self) -> Result<String> {
        let params = match self {
            Self::Gmr(m) => serde_json::to_value(m.params())?,
            Self::Rbf(m) => serde_json::to_value(m.params())?,
            Self::Gp(m) => serde_json::to_value(m.params())?,
        };
        let doc = ModelDocument { backend: self.backend().to_string(), version: MODEL_DOC_VERSION, dim: self.dim(), params };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != MODEL_DOC_VERSION {
            return Err(EsdsError::Format(format!("unknown version {}", doc.version)));
        }
        let model = match doc.backend.as_str() {
            "gmr" => Self::Gmr(GmrModel::from_params(serde_json::from_value(doc.params)?)?),
            "rbf" => Self::Rbf(RbfRidgeModel::from_params(serde_json::from_value(doc.params)?)?),
            "gp" => Self::Gp(GpModel::from_params(serde_json::from_value(doc.params)?)?),
            other => return Err(EsdsError::Format(format!("unknown backend {other:?}"))),
        };
        check_dim(doc.dim, model.dim())?;
        Ok(model)
    }
}

/// Backend choice plus hyperparameters. `None` fields use data-driven defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Gmr {
        k: usize,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_em_tol")]
        tol: f64,
    },
    Rbf {
        #[serde(default = "default_rbf_centers")]
        centers: usize,
        #[serde(default)]
        bandwidth: Option<f64>,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    Gp {
        #[serde(default)]
        scale: Option<f64>,
        #[serde(default)]
        bandwidth: Option<f64>,
        #[serde(default)]
        noise: Option<f64>,
    },
}

fn default_max_iter() -> usize {
    500
}
fn default_em_tol() -> f64 {
    1e-6
}
fn default_rbf_centers() -> usize {
    25
}
fn default_ridge() -> f64 {
    1e-6
}

impl BackendSpec {
    pub fn gmr(k: usize) -> Self {
        Self::Gmr { k, max_iter: default_max_iter(), tol: default_em_tol() }
    }

    pub fn rbf() -> Self {
        Self::Rbf { centers: default_rbf_centers(), bandwidth: None, ridge: default_ridge() }
    }

    pub fn gp() -> Self {
        Self::Gp { scale: None, bandwidth: None, noise: None }
    }

    /// Same backend with a different mixture size; other backends are returned unchanged.
    pub fn with_k(&self, k: usize) -> Self {
        match self {
            Self::Gmr { max_iter, tol, .. } => Self::Gmr { k, max_iter: *max_iter, tol: *tol },
            other => other.clone(),
        }
    }

    pub fn fit(&self, data: &TrainingSet, seed: u64) -> Result<RegressionModel> {
        match *self {
            Self::Gmr { k, max_iter, tol } => fit_gmr(data, k, seed, max_iter, tol).map(RegressionModel::Gmr),
            Self::Rbf { centers, bandwidth, ridge } => {
                let m = centers.min(data.len());
                let bw = bandwidth.unwrap_or_else(|| positive_or(median_pairwise_distance(data.inputs()), 1.0));
                fit_rbf_ridge(data, m, bw, ridge, seed).map(RegressionModel::Rbf)
            }
            Self::Gp { scale, bandwidth, noise } => {
                let var = data.target_variance();
                let scale = scale.unwrap_or_else(|| positive_or(var.sqrt(), 1.0));
                let bw = bandwidth.unwrap_or_else(|| positive_or(median_pairwise_distance(data.inputs()), 1.0));
                let noise = noise.unwrap_or_else(|| positive_or(1e-4 * var, 1e-10));
                fit_gp(data, scale, bw, noise).map(RegressionModel::Gp)
            }
        }
    }
}

fn positive_or(v: f64, fallback: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v
    } else {
        fallback
    }
}
