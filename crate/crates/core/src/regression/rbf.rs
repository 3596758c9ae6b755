use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use super::TrainingSet;
use crate::error::{check_dim, EsdsError, Result};

/// Gaussian RBF features `exp(−‖x − c‖²/b²)` with ridge-regularised weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfRidgeModel {
    centers: Vec<DVector<f64>>,
    bandwidth: f64,
    ridge: f64,
    /// `M × dim`.
    coefficients: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    pub centers: Vec<Vec<f64>>,
    pub bandwidth: f64,
    pub ridge: f64,
    /// Row-major `M × dim`.
    pub coefficients: Vec<f64>,
}

impl RbfRidgeModel {
    /// Assemble a model from explicit parts, e.g. a randomly drawn test field.
    pub fn from_parts(centers: Vec<DVector<f64>>, bandwidth: f64, ridge: f64, coefficients: DMatrix<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(EsdsError::InvalidParameter("RBF model needs at least one center".into()));
        }
        if !(bandwidth > 0.0) || !(ridge > 0.0) {
            return Err(EsdsError::InvalidParameter(format!("bandwidth {bandwidth} and ridge {ridge} must be > 0")));
        }
        let dim = centers[0].len();
        for c in &centers {
            check_dim(dim, c.len())?;
        }
        check_dim(centers.len(), coefficients.nrows())?;
        check_dim(dim, coefficients.ncols())?;
        Ok(Self { centers, bandwidth, ridge, coefficients })
    }

    pub fn from_params(p: RbfParams) -> Result<Self> {
        let m = p.centers.len();
        let centers: Vec<_> = p.centers.iter().map(|c| DVector::from_column_slice(c)).collect();
        let dim = centers.first().map_or(0, |c| c.len());
        check_dim(m * dim, p.coefficients.len())?;
        Self::from_parts(centers, p.bandwidth, p.ridge, DMatrix::from_row_slice(m, dim, &p.coefficients))
    }

    pub fn params(&self) -> RbfParams {
        RbfParams {
            centers: self.centers.iter().map(|c| c.as_slice().to_vec()).collect(),
            bandwidth: self.bandwidth,
            ridge: self.ridge,
            coefficients: self.coefficients.transpose().as_slice().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        let b2 = self.bandwidth * self.bandwidth;
        DVector::from_iterator(self.centers.len(), self.centers.iter().map(|c| (-(x - c).norm_squared() / b2).exp()))
    }

    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.coefficients.tr_mul(&self.features(x)))
    }
}

/// Fit with `m` centers placed by seeded k-means on the inputs.
pub fn fit_rbf_ridge(data: &TrainingSet, m: usize, bandwidth: f64, ridge: f64, seed: u64) -> Result<RbfRidgeModel> {
    if m == 0 || m > data.len() {
        return Err(EsdsError::InsufficientData(format!("{m} centers for {} samples", data.len())));
    }
    let centers = kmeans(data.inputs(), m, seed)?.centers;
    fit_rbf_ridge_with_centers(data, centers, bandwidth, ridge)
}

/// Solve `(ΦᵀΦ + ridge·I) W = ΦᵀY` for fixed centers.
pub fn fit_rbf_ridge_with_centers(
    data: &TrainingSet,
    centers: Vec<DVector<f64>>,
    bandwidth: f64,
    ridge: f64,
) -> Result<RbfRidgeModel> {
    let dim = data.dim();
    let m = centers.len();
    let mut model = RbfRidgeModel::from_parts(centers, bandwidth, ridge, DMatrix::zeros(m, dim))?;
    check_dim(dim, model.dim())?;

    let mut phi = DMatrix::zeros(data.len(), m);
    for (i, x) in data.inputs().iter().enumerate() {
        phi.row_mut(i).copy_from(&model.features(x).transpose());
    }
    let y = DMatrix::from_fn(data.len(), dim, |i, j| data.targets()[i][j]);
    let mut gram = phi.tr_mul(&phi);
    for i in 0..m {
        gram[(i, i)] += ridge;
    }
    let rhs = phi.tr_mul(&y);
    let chol = gram.cholesky().ok_or_else(|| EsdsError::Numerical {
        backend: "rbf",
        detail: "regularised normal equations are not positive definite".into(),
    })?;
    model.coefficients = chol.solve(&rhs);
    Ok(model)
}
