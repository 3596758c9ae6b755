//! Smooth switching functions for the energy tank.
//!
//! Everything here is a pure scalar map. The tank cap `κ(‖x‖)·s̄` is computed
//! by the caller and passed in as `cap`, so the gains can be sampled and
//! audited without a state vector.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, EsdsError, Result};

/// Shape parameters of the radial gate and of the tank/power bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainParams {
    /// Radial gate sharpness, in 1/length².
    pub a: f64,
    /// Half-width of the smoothing band on the power term `z`.
    pub z_band: f64,
    /// Lower tank band as a fraction of the cap.
    pub s_lo_frac: f64,
    /// Upper tank band as a fraction of the cap.
    pub s_hi_frac: f64,
    /// Clamp on the charging gain; must stay strictly below one.
    pub alpha_max: f64,
}

impl Default for GainParams {
    fn default() -> Self {
        Self { a: 0.1, z_band: 0.01, s_lo_frac: 0.1, s_hi_frac: 0.9, alpha_max: 0.99 }
    }
}

/// Sinusoidal smooth step: 0 below `lo`, 1 above `hi`, C¹ in between.
pub fn h1(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(EsdsError::InvalidParameter(format!("smooth step needs lo < hi, got lo = {lo}, hi = {hi}")));
    }
    Ok(smooth_step(x, lo, hi))
}

/// Complement of [`h1`].
pub fn h2(x: f64, lo: f64, hi: f64) -> Result<f64> {
    h1(x, lo, hi).map(|v| 1.0 - v)
}

// Callers guarantee lo < hi.
#[inline]
fn smooth_step(x: f64, lo: f64, hi: f64) -> f64 {
    if x >= hi {
        1.0
    } else if x <= lo {
        0.0
    } else {
        0.5 * (1.0 + (PI * ((x - lo) / (hi - lo) - 0.5)).sin())
    }
}

#[inline]
fn smooth_step_down(x: f64, lo: f64, hi: f64) -> f64 {
    1.0 - smooth_step(x, lo, hi)
}

impl GainParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.z_band > 0.0
            && 0.0 < self.s_lo_frac
            && self.s_lo_frac < self.s_hi_frac
            && self.s_hi_frac < 1.0
            && 0.0 < self.alpha_max
            && self.alpha_max < 1.0
            && [self.a, self.z_band, self.s_lo_frac, self.s_hi_frac, self.alpha_max].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(EsdsError::InvalidParameter(format!("gain parameters out of range: {self:?}")))
        }
    }

    /// Radial gate `1 − exp(−a·r²)`. Zero at the goal, tends to one far away.
    pub fn kappa(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(EsdsError::InvalidParameter(format!("radius must be >= 0, got {r}")));
        }
        Ok(self.kappa_sq(r * r))
    }

    /// Gate evaluated from the squared norm, skipping the square root.
    #[inline]
    pub fn kappa_sq(&self, r2: f64) -> f64 {
        -(-self.a * r2).exp_m1()
    }

    /// Reciprocal gate, defined as 1 at the goal.
    pub fn kappa_inv(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 / self.kappa(r)?)
    }

    /// Time derivative of `κ(‖x‖)` along the velocity `xdot`.
    pub fn kappa_dot(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> f64 {
        2.0 * self.a * (-self.a * x.norm_squared()).exp() * x.dot(xdot)
    }

    /// Power injected by the nonlinear field: `κ(‖x‖)·xᵀf`.
    pub fn z_power(&self, x: &DVector<f64>, f_val: &DVector<f64>) -> Result<f64> {
        check_dim(x.len(), f_val.len())?;
        Ok(self.kappa_sq(x.norm_squared()) * x.dot(f_val))
    }

    /// Tank charging gain. Zero once the tank reaches its cap.
    pub fn alpha_gain(&self, s: f64, cap: f64) -> f64 {
        if !is_open(cap) {
            return 0.0;
        }
        let lower = smooth_step(s, 0.0, self.s_lo_frac * cap);
        let upper = smooth_step_down(s, self.s_hi_frac * cap, cap);
        self.alpha_max.min(lower * upper)
    }

    /// Gain on the power term in the tank dynamics.
    ///
    /// Vanishes when the tank is full and the field dissipates, and when the
    /// tank is empty and the field extracts.
    pub fn beta_gain(&self, z: f64, s: f64, cap: f64) -> f64 {
        if !is_open(cap) {
            // A zero cap is both full and empty; both zero cases apply.
            return 0.0;
        }
        1.0 - smooth_step(z, -self.z_band, 0.0) * smooth_step_down(s, 0.0, self.s_lo_frac * cap)
            - smooth_step(s, self.s_hi_frac * cap, cap) * smooth_step_down(z, 0.0, self.z_band)
    }

    /// Gain on the nonlinear term of the velocity field; suppresses
    /// extraction when the tank runs dry.
    pub fn gamma_gain(&self, z: f64, s: f64, cap: f64) -> f64 {
        let depleted = if is_open(cap) { smooth_step_down(s, 0.0, self.s_lo_frac * cap) } else { 1.0 };
        1.0 - smooth_step(z, 0.0, self.z_band) * depleted
    }
}

// A cap too small to hold three distinct band edges behaves like zero.
#[inline]
fn is_open(cap: f64) -> bool {
    cap >= f64::MIN_POSITIVE * 16.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p() -> GainParams {
        GainParams::default()
    }

    #[test]
    fn h1_branches() {
        assert_eq!(h1(2.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(h1(-1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(h1(0.5, 0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(h2(2.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(h2(-1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(h2(0.5, 0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn h1_rejects_empty_band() {
        assert!(h1(0.0, 1.0, 1.0).is_err());
        assert!(h2(0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn h1_is_c1_at_band_edges() {
        // Slope from the inside approaches zero at both edges.
        let eps = 1e-6;
        let d_lo = (h1(eps, 0.0, 1.0).unwrap() - h1(0.0, 0.0, 1.0).unwrap()) / eps;
        let d_hi = (h1(1.0, 0.0, 1.0).unwrap() - h1(1.0 - eps, 0.0, 1.0).unwrap()) / eps;
        assert!(d_lo.abs() < 1e-4 && d_hi.abs() < 1e-4);
    }

    #[test]
    fn kappa_values() {
        assert_eq!(p().kappa(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(p().kappa(10f64.sqrt()).unwrap(), 0.632_120_558_828_557_7, epsilon = 1e-12);
        assert_abs_diff_eq!(p().kappa(100.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(p().kappa(-1.0).is_err());
        assert!(p().kappa(f64::NAN).is_err());
    }

    #[test]
    fn kappa_inv_values() {
        assert_eq!(p().kappa_inv(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(p().kappa_inv(10f64.sqrt()).unwrap(), 1.581_976_706_869_326_4, epsilon = 1e-12);
    }

    #[test]
    fn kappa_dot_values() {
        let zero = DVector::zeros(2);
        assert_eq!(p().kappa_dot(&zero, &DVector::from_vec(vec![3.0, -1.0])), 0.0);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_abs_diff_eq!(p().kappa_dot(&x, &x), 0.2 * (-0.1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(p().kappa_dot(&x, &x), 0.180_967_483_607_191_9, epsilon = 1e-12);
        assert!(p().kappa_dot(&x, &(-&x)) < 0.0);
    }

    #[test]
    fn kappa_dot_matches_finite_difference() {
        let x = DVector::from_vec(vec![1.3, -2.1, 0.4]);
        let v = DVector::from_vec(vec![0.5, 0.7, -1.2]);
        let h = 1e-6;
        let fd = (p().kappa((&x + &v * h).norm()).unwrap() - p().kappa((&x - &v * h).norm()).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(p().kappa_dot(&x, &v), fd, epsilon = 1e-8);
    }

    #[test]
    fn z_power_values() {
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let f = DVector::from_vec(vec![-2.0, 5.0]);
        assert_abs_diff_eq!(p().z_power(&x, &f).unwrap(), -0.190_325_163_928_946_6, epsilon = 1e-12);
        assert_eq!(p().z_power(&DVector::zeros(2), &f).unwrap(), 0.0);
        assert_eq!(p().z_power(&x, &DVector::zeros(2)).unwrap(), 0.0);
        assert!(p().z_power(&x, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn alpha_examples() {
        let cap = 4.0;
        assert_eq!(p().alpha_gain(cap, cap), 0.0);
        assert_eq!(p().alpha_gain(7.0, cap), 0.0);
        assert_eq!(p().alpha_gain(0.0, cap), 0.0);
        assert_eq!(p().alpha_gain(0.5 * cap, cap), 0.99);
        assert_eq!(p().alpha_gain(0.0, 0.0), 0.0);
    }

    #[test]
    fn beta_examples() {
        let cap = 4.0;
        assert_eq!(p().beta_gain(-1.0, cap, cap), 0.0);
        assert_eq!(p().beta_gain(1.0, 0.0, cap), 0.0);
        assert_eq!(p().beta_gain(1.0, 0.5 * cap, cap), 1.0);
    }

    #[test]
    fn gamma_examples() {
        let cap = 4.0;
        assert_eq!(p().gamma_gain(0.01, 0.0, cap), 0.0);
        assert_eq!(p().gamma_gain(5.0, 0.0, cap), 0.0);
        assert_eq!(p().gamma_gain(-0.3, 0.0, cap), 1.0);
        assert_eq!(p().gamma_gain(-0.3, cap, cap), 1.0);
        assert_eq!(p().gamma_gain(1.0, 0.5 * cap, cap), 1.0);
    }

    #[test]
    fn open_question_band_is_reported_not_hidden() {
        // Inside 0 < z < z_band with an empty tank the smooth forms disagree.
        let g = p().gamma_gain(0.005, 0.0, 1.0);
        let b = p().beta_gain(0.005, 0.0, 1.0);
        assert_abs_diff_eq!(g, 0.5, epsilon = 1e-12);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn zero_cap_limits() {
        let q = p();
        for z in [-1.0, -0.01, -0.001, 0.0, 0.001, 0.01, 1.0] {
            assert_eq!(q.alpha_gain(0.0, 0.0), 0.0);
            assert_eq!(q.beta_gain(z, 0.0, 0.0), 0.0);
            let g = q.gamma_gain(z, 0.0, 0.0);
            if z >= q.z_band {
                assert_eq!(g, 0.0);
            }
            if z <= 0.0 {
                assert_eq!(g, 1.0);
            }
        }
    }

    #[test]
    fn gains_are_continuous_at_branch_points() {
        let q = p();
        let cap = 2.0;
        let eps = 1e-9;
        let s_edges = [0.0, q.s_lo_frac * cap, q.s_hi_frac * cap, cap];
        let z_edges = [-q.z_band, 0.0, q.z_band];
        for &s in &s_edges {
            assert!((q.alpha_gain(s + eps, cap) - q.alpha_gain((s - eps).max(0.0), cap)).abs() < 1e-6);
            for z in [-1.0, -0.004, 0.004, 1.0] {
                assert!((q.beta_gain(z, s + eps, cap) - q.beta_gain(z, (s - eps).max(0.0), cap)).abs() < 1e-6);
                assert!((q.gamma_gain(z, s + eps, cap) - q.gamma_gain(z, (s - eps).max(0.0), cap)).abs() < 1e-6);
            }
        }
        for &z in &z_edges {
            for s in [0.0, 0.05, 1.0, 1.9, 2.0] {
                assert!((q.beta_gain(z + eps, s, cap) - q.beta_gain(z - eps, s, cap)).abs() < 1e-6);
                assert!((q.gamma_gain(z + eps, s, cap) - q.gamma_gain(z - eps, s, cap)).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn h1_monotone_and_complementary(x in -5.0..5.0f64, dx in 0.0..2.0f64, lo in -3.0..3.0f64, w in 1e-3..4.0f64) {
            let hi = lo + w;
            let a = h1(x, lo, hi).unwrap();
            let b = h1(x + dx, lo, hi).unwrap();
            prop_assert!(b >= a);
            prop_assert_eq!(a + h2(x, lo, hi).unwrap(), 1.0);
        }

        #[test]
        fn gain_ranges(z in -0.1..0.1f64, s_frac in 0.0..2.0f64, cap in prop::sample::select(vec![0.0, 0.1, 1.0, 100.0])) {
            let q = p();
            let s = s_frac * cap;
            let alpha = q.alpha_gain(s, cap);
            let beta = q.beta_gain(z, s, cap);
            let gamma = q.gamma_gain(z, s, cap);
            prop_assert!((0.0..=0.99).contains(&alpha));
            prop_assert!(alpha < 1.0);
            prop_assert!((0.0..=1.0).contains(&beta));
            prop_assert!((0.0..=1.0).contains(&gamma));
            if s >= cap { prop_assert_eq!(alpha, 0.0); }
            if z >= q.z_band { prop_assert_eq!(gamma, beta); }
            if z <= 0.0 { prop_assert!(gamma >= beta); }
        }
    }
}
