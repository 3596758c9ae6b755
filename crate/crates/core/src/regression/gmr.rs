//! Gaussian mixture regression.
//!
//! A full-covariance mixture is fitted by EM on the joint `(input, target)`
//! vectors and queried through the conditional mean of the target given the
//! input.
//!
//! Regularisation is applied blockwise: the input block `Σxx` and the
//! conditional covariance `Σyy − Σyx Σxx⁻¹ Σxy` each get their eigenvalues
//! floored, and the target block is rebuilt from them. The regression matrix
//! `Σyx Σxx⁻¹` is left untouched whenever the input block is well conditioned,
//! so exactly linear data is reproduced exactly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use super::{mean_variance, TrainingSet};
use crate::error::{check_dim, EsdsError, Result};

/// Relative size of the covariance floor with respect to the average data variance.
pub const REG_FRACTION: f64 = 1e-6;

/// Serialisable parameters of a mixture over `2·dim`-dimensional joint vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmrParams {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major `2·dim × 2·dim` matrices.
    pub covariances: Vec<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct Conditional {
    log_weight: f64,
    mu_x: DVector<f64>,
    mu_y: DVector<f64>,
    chol_xx: DMatrix<f64>,
    log_det_xx: f64,
    /// `Σyx Σxx⁻¹`.
    gain: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmrModel {
    params: GmrParams,
    comps: Vec<Conditional>,
    ll_trace: Vec<f64>,
}

impl GmrModel {
    pub fn from_params(params: GmrParams) -> Result<Self> {
        let k = params.weights.len();
        let n = params.dim;
        if k == 0 || n == 0 {
            return Err(EsdsError::InvalidParameter("empty mixture".into()));
        }
        if params.means.len() != k || params.covariances.len() != k {
            return Err(EsdsError::InvalidParameter("mixture arrays disagree on K".into()));
        }
        let wsum: f64 = params.weights.iter().sum();
        if params.weights.iter().any(|w| !(*w >= 0.0)) || (wsum - 1.0).abs() > 1e-9 {
            return Err(EsdsError::InvalidParameter(format!("weights must be >= 0 and sum to 1, sum = {wsum}")));
        }
        let mut comps = Vec::with_capacity(k);
        for j in 0..k {
            check_dim(2 * n, params.means[j].len())?;
            check_dim(4 * n * n, params.covariances[j].len())?;
            let mean = DVector::from_column_slice(&params.means[j]);
            let cov = DMatrix::from_row_slice(2 * n, 2 * n, &params.covariances[j]);
            comps.push(conditional(params.weights[j], &mean, &cov, n)?);
        }
        Ok(Self { params, comps, ll_trace: Vec::new() })
    }

    pub fn params(&self) -> &GmrParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn k(&self) -> usize {
        self.params.weights.len()
    }

    /// Log-likelihood after each E-step of the fit; empty for models built from parameters.
    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.ll_trace
    }

    /// Conditional mean of the target given `x`.
    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        check_dim(n, x.len())?;
        let norm = 0.5 * n as f64 * (2.0 * PI).ln();
        let mut logp = Vec::with_capacity(self.comps.len());
        let mut diffs = Vec::with_capacity(self.comps.len());
        for c in &self.comps {
            let d = x - &c.mu_x;
            let u = c
                .chol_xx
                .solve_lower_triangular(&d)
                .ok_or_else(|| EsdsError::SingularModel("input covariance not invertible".into()))?;
            logp.push(c.log_weight - 0.5 * u.norm_squared() - 0.5 * c.log_det_xx - norm);
            diffs.push(d);
        }
        let lse = log_sum_exp(&logp);
        let mut y = DVector::zeros(n);
        for ((c, d), lp) in self.comps.iter().zip(&diffs).zip(&logp) {
            let h = (lp - lse).exp();
            if h > 0.0 {
                y += h * (&c.mu_y + &c.gain * d);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EsdsError::Numerical { backend: "gmr", detail: format!("non-finite prediction at {x}") });
        }
        Ok(y)
    }
}

fn conditional(weight: f64, mean: &DVector<f64>, cov: &DMatrix<f64>, n: usize) -> Result<Conditional> {
    let sxx = cov.view((0, 0), (n, n)).into_owned();
    let syx = cov.view((n, 0), (n, n)).into_owned();
    let chol = sxx
        .clone()
        .cholesky()
        .ok_or_else(|| EsdsError::SingularModel("input block of a component is not positive definite".into()))?;
    let l = chol.l();
    let log_det_xx = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    // gain = Σyx Σxx⁻¹  ⇔  Σxx gainᵀ = Σxy
    let gain = chol.solve(&syx.transpose()).transpose();
    Ok(Conditional {
        log_weight: weight.ln(),
        mu_x: mean.rows(0, n).into_owned(),
        mu_y: mean.rows(n, n).into_owned(),
        chol_xx: l,
        log_det_xx,
        gain,
    })
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return sym;
    }
    let lam = eig.eigenvalues.map(|l| l.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose()
}

fn regularize(cov: &DMatrix<f64>, n: usize, floor: f64) -> Result<DMatrix<f64>> {
    let sxx = floor_eigenvalues(&cov.view((0, 0), (n, n)).into_owned(), floor);
    let sxy = cov.view((0, n), (n, n)).into_owned();
    let syy = cov.view((n, n), (n, n)).into_owned();
    let chol = sxx.clone().cholesky().ok_or_else(|| EsdsError::SingularModel("input covariance collapsed".into()))?;
    let b = chol.solve(&sxy);
    let explained = sxy.transpose() * &b;
    let schur = floor_eigenvalues(&(syy - &explained), floor);
    let syy = (&schur + &explained + (&schur + &explained).transpose()) * 0.5;

    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&sxx);
    out.view_mut((0, n), (n, n)).copy_from(&sxy);
    out.view_mut((n, 0), (n, n)).copy_from(&sxy.transpose());
    out.view_mut((n, n), (n, n)).copy_from(&syy);
    Ok(out)
}

struct Joint {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

fn e_step(points: &[DVector<f64>], joint: &Joint, resp: &mut [Vec<f64>]) -> Result<f64> {
    let dim = points[0].len();
    let norm = 0.5 * dim as f64 * (2.0 * PI).ln();
    let mut chols = Vec::with_capacity(joint.covs.len());
    for cov in &joint.covs {
        let l = cov
            .clone()
            .cholesky()
            .ok_or_else(|| EsdsError::SingularModel("component covariance not positive definite".into()))?
            .l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        chols.push((l, log_det));
    }
    let mut ll = 0.0;
    let mut logp = vec![0.0; joint.weights.len()];
    for (i, p) in points.iter().enumerate() {
        for (j, (l, log_det)) in chols.iter().enumerate() {
            let u = l.solve_lower_triangular(&(p - &joint.means[j])).unwrap_or_else(|| DVector::zeros(dim));
            logp[j] = joint.weights[j].ln() - 0.5 * u.norm_squared() - 0.5 * log_det - norm;
        }
        let lse = log_sum_exp(&logp);
        ll += lse;
        for (r, lp) in resp[i].iter_mut().zip(&logp) {
            *r = (lp - lse).exp();
        }
    }
    Ok(ll)
}

fn m_step(points: &[DVector<f64>], resp: &[Vec<f64>], joint: &mut Joint, n: usize, floor: f64) -> Result<()> {
    let total = points.len() as f64;
    let dim = points[0].len();
    for j in 0..joint.weights.len() {
        let nk: f64 = resp.iter().map(|r| r[j]).sum();
        joint.weights[j] = nk / total;
        if nk <= 1e-10 * total {
            // Starved component: keep its shape, let its weight fade.
            continue;
        }
        let mean = points.iter().zip(resp).fold(DVector::zeros(dim), |acc, (p, r)| acc + p * r[j]) / nk;
        let mut cov = DMatrix::zeros(dim, dim);
        for (p, r) in points.iter().zip(resp) {
            let d = p - &mean;
            cov.ger(r[j], &d, &d, 1.0);
        }
        cov /= nk;
        joint.covs[j] = regularize(&cov, n, floor)?;
        joint.means[j] = mean;
    }
    let wsum: f64 = joint.weights.iter().sum();
    for w in &mut joint.weights {
        *w /= wsum;
    }
    Ok(())
}

/// Fit a `k`-component GMR model by EM from a seeded k-means start.
///
/// Iteration stops once the log-likelihood gains less than `tol` or after
/// `max_iter` M-steps.
pub fn fit_gmr(data: &TrainingSet, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<GmrModel> {
    if k == 0 {
        return Err(EsdsError::InvalidParameter("GMR needs at least one component".into()));
    }
    if k > data.len() {
        return Err(EsdsError::InsufficientData(format!("{k} components but only {} samples", data.len())));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(EsdsError::InvalidParameter("EM needs tol > 0 and max_iter >= 1".into()));
    }
    let n = data.dim();
    let points: Vec<DVector<f64>> = data
        .inputs()
        .iter()
        .zip(data.targets())
        .map(|(x, y)| {
            let mut z = DVector::zeros(2 * n);
            z.rows_mut(0, n).copy_from(x);
            z.rows_mut(n, n).copy_from(y);
            z
        })
        .collect();
    let avg_var = mean_variance(&points);
    let floor = if avg_var > 0.0 { REG_FRACTION * avg_var } else { 1e-12 };

    let init = kmeans(&points, k, seed)?;
    let mut joint = Joint { weights: vec![0.0; k], means: init.centers.clone(), covs: vec![DMatrix::zeros(2 * n, 2 * n); k] };
    let mut resp = vec![vec![0.0; k]; points.len()];
    for (r, &l) in resp.iter_mut().zip(&init.labels) {
        r[l] = 1.0;
    }
    m_step(&points, &resp, &mut joint, n, floor)?;

    let mut trace = Vec::new();
    for iter in 0..=max_iter {
        let ll = e_step(&points, &joint, &mut resp)?;
        if !ll.is_finite() {
            return Err(EsdsError::SingularModel(format!("log-likelihood became {ll}")));
        }
        let converged = trace.last().is_some_and(|prev: &f64| ll - prev < tol);
        trace.push(ll);
        if converged || iter == max_iter {
            break;
        }
        m_step(&points, &resp, &mut joint, n, floor)?;
    }

    let params = GmrParams {
        dim: n,
        weights: joint.weights,
        means: joint.means.iter().map(|m| m.as_slice().to_vec()).collect(),
        covariances: joint.covs.iter().map(|c| c.transpose().as_slice().to_vec()).collect(),
        seed,
    };
    let mut model = GmrModel::from_params(params)?;
    model.ll_trace = trace;
    Ok(model)
}
