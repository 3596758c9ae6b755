use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{check_dim, EsdsError, Result};

/// Largest training set solved exactly.
pub const MAX_GP_POINTS: usize = 5000;

/// Exact GP posterior mean with a squared-exponential kernel
/// `scale²·exp(−‖x − x'‖² / (2·bandwidth²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    train_inputs: Vec<DVector<f64>>,
    kernel_scale: f64,
    kernel_bandwidth: f64,
    noise: f64,
    /// `count × dim`.
    dual: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub train_inputs: Vec<Vec<f64>>,
    pub kernel_scale: f64,
    pub kernel_bandwidth: f64,
    pub noise: f64,
    /// Row-major `count × dim`.
    pub dual_coefficients: Vec<f64>,
}

impl GpModel {
    pub fn from_params(p: GpParams) -> Result<Self> {
        let count = p.train_inputs.len();
        if count == 0 {
            return Err(EsdsError::InvalidParameter("GP without training inputs".into()));
        }
        let dim = p.train_inputs[0].len();
        for x in &p.train_inputs {
            check_dim(dim, x.len())?;
        }
        check_dim(count * dim, p.dual_coefficients.len())?;
        check_hyper(p.kernel_scale, p.kernel_bandwidth, p.noise)?;
        Ok(Self {
            train_inputs: p.train_inputs.iter().map(|x| DVector::from_column_slice(x)).collect(),
            kernel_scale: p.kernel_scale,
            kernel_bandwidth: p.kernel_bandwidth,
            noise: p.noise,
            dual: DMatrix::from_row_slice(count, dim, &p.dual_coefficients),
        })
    }

    pub fn params(&self) -> GpParams {
        GpParams {
            train_inputs: self.train_inputs.iter().map(|x| x.as_slice().to_vec()).collect(),
            kernel_scale: self.kernel_scale,
            kernel_bandwidth: self.kernel_bandwidth,
            noise: self.noise,
            dual_coefficients: self.dual.transpose().as_slice().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.train_inputs[0].len()
    }

    pub fn dual_coefficients(&self) -> &DMatrix<f64> {
        &self.dual
    }

    fn kernel(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        se_kernel(a, b, self.kernel_scale, self.kernel_bandwidth)
    }

    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        let k = DVector::from_iterator(self.train_inputs.len(), self.train_inputs.iter().map(|t| self.kernel(x, t)));
        Ok(self.dual.tr_mul(&k))
    }
}

fn se_kernel(a: &DVector<f64>, b: &DVector<f64>, scale: f64, bandwidth: f64) -> f64 {
    scale * scale * (-(a - b).norm_squared() / (2.0 * bandwidth * bandwidth)).exp()
}

fn check_hyper(scale: f64, bandwidth: f64, noise: f64) -> Result<()> {
    if scale > 0.0 && bandwidth > 0.0 && noise > 0.0 && scale.is_finite() && bandwidth.is_finite() && noise.is_finite() {
        Ok(())
    } else {
        Err(EsdsError::InvalidParameter(format!(
            "GP hyperparameters must be positive: scale {scale}, bandwidth {bandwidth}, noise {noise}"
        )))
    }
}

/// Solve `(K + noise·I) α = Y` by Cholesky.
pub fn fit_gp(data: &TrainingSet, kernel_scale: f64, kernel_bandwidth: f64, noise: f64) -> Result<GpModel> {
    check_hyper(kernel_scale, kernel_bandwidth, noise)?;
    let count = data.len();
    if count > MAX_GP_POINTS {
        return Err(EsdsError::InvalidParameter(format!("exact GP limited to {MAX_GP_POINTS} points, got {count}")));
    }
    let xs = data.inputs();
    let mut gram = DMatrix::zeros(count, count);
    for i in 0..count {
        for j in 0..=i {
            let k = se_kernel(&xs[i], &xs[j], kernel_scale, kernel_bandwidth);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
        gram[(i, i)] += noise;
    }
    let y = DMatrix::from_fn(count, data.dim(), |i, j| data.targets()[i][j]);
    let chol = gram.cholesky().ok_or_else(|| EsdsError::Numerical {
        backend: "gp",
        detail: format!(
            "Gram + noise·I is not positive definite ({count} points, scale {kernel_scale}, bandwidth {kernel_bandwidth}, noise {noise}); increase the noise or remove duplicate inputs"
        ),
    })?;
    let dual = chol.solve(&y);
    Ok(GpModel { train_inputs: xs.to_vec(), kernel_scale, kernel_bandwidth, noise, dual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_closed_form() {
        let x0 = DVector::from_vec(vec![0.4, -1.0]);
        let y0 = DVector::from_vec(vec![2.0, -3.0]);
        let x1 = DVector::from_vec(vec![1e6, 1e6]);
        // A second, infinitely distant point keeps the set valid without coupling.
        let data = TrainingSet::new(vec![x0.clone(), x1], vec![y0.clone(), DVector::zeros(2)]).unwrap();
        let (scale, noise) = (1.5, 0.3);
        let model = fit_gp(&data, scale, 0.8, noise).unwrap();
        let expect = &y0 * (scale * scale / (scale * scale + noise));
        assert!((model.predict(&x0).unwrap() - expect).amax() < 1e-12);
    }

    #[test]
    fn interpolates_with_vanishing_noise() {
        let xs: Vec<_> = (0..12).map(|i| DVector::from_vec(vec![i as f64 * 0.5, (i as f64).cos()])).collect();
        let ys: Vec<_> = xs.iter().map(|x| DVector::from_vec(vec![x[0].sin(), x[1] * x[0]])).collect();
        let data = TrainingSet::new(xs.clone(), ys.clone()).unwrap();
        let model = fit_gp(&data, 1.0, 0.6, 1e-10).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((model.predict(x).unwrap() - y).amax() < 1e-6);
        }
    }

    #[test]
    fn zero_targets_zero_duals() {
        let xs: Vec<_> = (0..5).map(|i| DVector::from_vec(vec![i as f64])).collect();
        let data = TrainingSet::new(xs, vec![DVector::zeros(1); 5]).unwrap();
        let model = fit_gp(&data, 1.0, 1.0, 1e-3).unwrap();
        assert!(model.dual_coefficients().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let xs: Vec<_> = (0..3).map(|i| DVector::from_vec(vec![i as f64])).collect();
        let data = TrainingSet::new(xs.clone(), xs).unwrap();
        assert!(fit_gp(&data, 1.0, 1.0, 0.0).is_err());
        assert!(fit_gp(&data, -1.0, 1.0, 1e-3).is_err());
    }
}
