//! The stabilized dynamical system and its energy tank.
//!
//! The learned field enters the motion as `ẋ = −x + γ(z,s)·κ(‖x‖)·f(x)`. The
//! tank `s` is charged while the field dissipates (`z < 0`) and drained while
//! it injects energy (`z > 0`). Once the tank is empty `γ` switches the
//! nonlinear term off and the linear attractor `−x` takes over, so
//! `V_s = ½‖x‖² + s` never increases.
//!
//! All state arguments of [`StabilizedDs::velocity`] and of the tank
//! functions are expressed relative to the goal. [`StabilizedDs::integrate`]
//! takes and returns absolute coordinates.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, EsdsError, Result};
use crate::gains::GainParams;
use crate::regression::VectorField;

/// Stored energy and its cap parameter `s̄`. The admissible range at state
/// `x` is `0 ≤ s ≤ κ(‖x‖)·s̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankState {
    pub s: f64,
    pub s_bar: f64,
}

/// Tank starts full: `s₀ = κ(‖x₀‖)·s̄`.
pub fn init_tank(x0: &DVector<f64>, s_bar: f64, params: &GainParams) -> Result<TankState> {
    if !(s_bar >= 0.0) {
        return Err(EsdsError::InvalidParameter(format!("s_bar must be >= 0, got {s_bar}")));
    }
    Ok(TankState { s: params.kappa_sq(x0.norm_squared()) * s_bar, s_bar })
}

/// Which storage law was active during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TankBranch {
    /// `ṡ = α‖x‖² − βz`.
    Nominal,
    /// Tank at its cap while the cap shrinks: `ṡ = κ̇·s̄`.
    FollowCap,
}

/// Rates of one tank evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankRate {
    pub rate: f64,
    pub branch: TankBranch,
    pub alpha: f64,
    pub beta: f64,
    pub cap: f64,
    pub cap_rate: f64,
}

pub fn tank_rate(tank: &TankState, x: &DVector<f64>, xdot: &DVector<f64>, z: f64, params: &GainParams) -> TankRate {
    let r2 = x.norm_squared();
    let cap = params.kappa_sq(r2) * tank.s_bar;
    let alpha = params.alpha_gain(tank.s, cap);
    let beta = params.beta_gain(z, tank.s, cap);
    let nominal = alpha * r2 - beta * z;
    let cap_rate = params.kappa_dot(x, xdot) * tank.s_bar;
    let (rate, branch) = if tank.s >= cap && nominal > cap_rate && cap_rate < 0.0 {
        (cap_rate, TankBranch::FollowCap)
    } else {
        (nominal, TankBranch::Nominal)
    };
    TankRate { rate, branch, alpha, beta, cap, cap_rate }
}

/// One explicit step of the tank, landing at `x + ẋ·dt`.
pub fn tank_step(
    tank: &TankState,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    z: f64,
    dt: f64,
    params: &GainParams,
) -> Result<TankState> {
    let x_next = x + xdot * dt;
    tank_step_to(tank, x, xdot, z, dt, &x_next, params)
}

/// As [`tank_step`], with the state reached at the end of the step given
/// explicitly. The result is clamped to `[0, κ(‖x_next‖)·s̄]`.
pub fn tank_step_to(
    tank: &TankState,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    z: f64,
    dt: f64,
    x_next: &DVector<f64>,
    params: &GainParams,
) -> Result<TankState> {
    if !(dt > 0.0) {
        return Err(EsdsError::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let r = tank_rate(tank, x, xdot, z, params);
    let upper = params.kappa_sq(x_next.norm_squared()) * tank.s_bar;
    let s = (tank.s + r.rate * dt).min(upper).max(0.0);
    Ok(TankState { s, s_bar: tank.s_bar })
}

/// Velocity of the stabilized field at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySample {
    pub xdot: DVector<f64>,
    pub z: f64,
    pub gamma: f64,
}

/// A learned field plus everything needed to run it as a stable motion generator.
#[derive(Debug, Clone)]
pub struct StabilizedDs<F> {
    field: F,
    s_bar: f64,
    gain_params: GainParams,
    goal: DVector<f64>,
}

/// Euler integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationSettings {
    pub dt: f64,
    pub max_steps: usize,
    /// Distance to the goal treated as arrival.
    pub conv_tol: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self { dt: 0.01, max_steps: 100_000, conv_tol: 1e-3 }
    }
}

impl<F: VectorField> StabilizedDs<F> {
    pub fn new(field: F, s_bar: f64, gain_params: GainParams) -> Result<Self> {
        gain_params.validate()?;
        if !(s_bar >= 0.0) || !s_bar.is_finite() {
            return Err(EsdsError::InvalidParameter(format!("s_bar must be finite and >= 0, got {s_bar}")));
        }
        let goal = DVector::zeros(field.dim());
        Ok(Self { field, s_bar, gain_params, goal })
    }

    /// Place the attractor at `goal` (absolute coordinates).
    pub fn with_goal(mut self, goal: DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), goal.len())?;
        self.goal = goal;
        Ok(self)
    }

    /// Same field with another cap.
    pub fn with_s_bar(&self, s_bar: f64) -> Result<Self>
    where
        F: Clone,
    {
        Self::new(self.field.clone(), s_bar, self.gain_params).and_then(|d| d.with_goal(self.goal.clone()))
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn s_bar(&self) -> f64 {
        self.s_bar
    }

    pub fn gain_params(&self) -> &GainParams {
        &self.gain_params
    }

    pub fn goal(&self) -> &DVector<f64> {
        &self.goal
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.field.predict(x)?;
        check_dim(x.len(), f.len())?;
        if f.iter().any(|v| !v.is_finite()) {
            return Err(EsdsError::Numerical {
                backend: self.field.backend(),
                detail: format!("non-finite prediction at {}", x.transpose()),
            });
        }
        Ok(f)
    }

    /// `ẋ = −x + γ(z,s)·κ(‖x‖)·f(x)` for a goal-relative `x`.
    pub fn velocity(&self, x: &DVector<f64>, tank: &TankState) -> Result<VelocitySample> {
        check_dim(self.dim(), x.len())?;
        let f = self.predict(x)?;
        let kappa = self.gain_params.kappa_sq(x.norm_squared());
        let z = kappa * x.dot(&f);
        let cap = kappa * tank.s_bar;
        let gamma = self.gain_params.gamma_gain(z, tank.s, cap);
        let xdot = if gamma == 0.0 { -x } else { -x + f * (gamma * kappa) };
        Ok(VelocitySample { xdot, z, gamma })
    }

    /// The unstabilized field `−x + κ(‖x‖)·f(x)`.
    pub fn raw_velocity(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        let f = self.predict(x)?;
        Ok(-x + f * self.gain_params.kappa_sq(x.norm_squared()))
    }

    pub fn init_tank(&self, x: &DVector<f64>) -> TankState {
        TankState { s: self.gain_params.kappa_sq(x.norm_squared()) * self.s_bar, s_bar: self.s_bar }
    }

    /// Explicit-Euler co-integration of state and tank from the absolute start `x0`.
    pub fn integrate(&self, x0: &DVector<f64>, settings: &IntegrationSettings) -> Result<Rollout> {
        check_dim(self.dim(), x0.len())?;
        let IntegrationSettings { dt, max_steps, conv_tol } = *settings;
        if !(dt > 0.0) || !(conv_tol > 0.0) || max_steps == 0 {
            return Err(EsdsError::InvalidParameter("need dt > 0, conv_tol > 0, max_steps >= 1".into()));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(EsdsError::InvalidParameter("start state must be finite".into()));
        }
        let mut x = x0 - &self.goal;
        let mut tank = self.init_tank(&x);
        let mut out = Rollout::with_capacity(self.dim(), dt, conv_tol, 256);
        let mut step = 0;
        loop {
            let sample = self.velocity(&x, &tank)?;
            let arrived = x.norm() < conv_tol;
            out.push(step as f64 * dt, &x + &self.goal, &sample, tank.s, 0.5 * x.norm_squared() + tank.s);
            if arrived {
                out.converged = true;
                break;
            }
            if step == max_steps {
                break;
            }
            let x_next = &x + &sample.xdot * dt;
            let next_tank = tank_step_to(&tank, &x, &sample.xdot, sample.z, dt, &x_next, &self.gain_params)?;
            if x_next.iter().any(|v| !v.is_finite()) || !next_tank.s.is_finite() {
                return Err(EsdsError::Divergence { step: step + 1, detail: format!("state {}", x_next.transpose()) });
            }
            x = x_next;
            tank = next_tank;
            step += 1;
        }
        out.steps = step;
        Ok(out)
    }

    /// Recompute the Lyapunov derivative along a rollout and compare it with
    /// the discrete trace.
    pub fn lyapunov_audit(&self, rollout: &Rollout) -> Result<AuditReport> {
        let p = &self.gain_params;
        let dt = rollout.dt;
        let v0 = rollout.lyapunov_trace.first().copied().unwrap_or(0.0);
        let mut report = AuditReport { initial_value: v0, ..AuditReport::default() };
        for k in 0..rollout.len() {
            let x = &rollout.states[k] - &self.goal;
            let s = rollout.tank_trace[k];
            let cap = p.kappa_sq(x.norm_squared()) * self.s_bar;
            report.max_bound_violation = report.max_bound_violation.max(-s).max(s - cap);
            if k + 1 == rollout.len() {
                break;
            }
            let tank = TankState { s, s_bar: self.s_bar };
            let sample = self.velocity(&x, &tank)?;
            let r = tank_rate(&tank, &x, &sample.xdot, sample.z, p);
            let r2 = x.norm_squared();
            let analytic = match r.branch {
                TankBranch::Nominal => -(1.0 - r.alpha) * r2 + (sample.gamma - r.beta) * sample.z,
                TankBranch::FollowCap => -r2 + sample.gamma * sample.z + r.cap_rate,
            };
            let jump = rollout.lyapunov_trace[k + 1] - rollout.lyapunov_trace[k];
            report.max_positive_jump = report.max_positive_jump.max(jump);
            let unclamped = s + r.rate * dt;
            if (rollout.tank_trace[k + 1] - unclamped).abs() > 1e-12 * (1.0 + self.s_bar) {
                report.clamped_steps += 1;
            } else {
                report.max_discrepancy = report.max_discrepancy.max((analytic - jump / dt).abs());
            }
            if r.branch == TankBranch::FollowCap {
                report.cap_following_steps += 1;
            }
            if x.norm() >= rollout.conv_tol {
                report.steps_outside_ball += 1;
                report.max_analytic_rate = report.max_analytic_rate.max(analytic);
                if analytic > 0.0 {
                    report.positive_rate_steps += 1;
                }
            }
        }
        Ok(report)
    }
}

/// Outcome of a numerical Lyapunov check along one rollout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    /// `V_s` at the first sample.
    pub initial_value: f64,
    /// Largest increase of `V_s` between consecutive samples (0 if none).
    pub max_positive_jump: f64,
    /// Largest excursion of `s` outside `[0, κ(‖x‖)·s̄]`.
    pub max_bound_violation: f64,
    /// Largest gap between the analytic derivative and the finite difference,
    /// over steps where the tank was not clamped.
    pub max_discrepancy: f64,
    /// Largest analytic derivative seen outside the arrival ball.
    pub max_analytic_rate: f64,
    pub steps_outside_ball: usize,
    pub positive_rate_steps: usize,
    pub cap_following_steps: usize,
    /// Steps where the post-step clamp changed the tank level.
    pub clamped_steps: usize,
}

impl AuditReport {
    /// Share of steps outside the arrival ball with a positive analytic derivative.
    pub fn positive_rate_fraction(&self) -> f64 {
        if self.steps_outside_ball == 0 {
            0.0
        } else {
            self.positive_rate_steps as f64 / self.steps_outside_ball as f64
        }
    }

    /// Largest increase of `V_s` relative to its initial value.
    pub fn relative_jump(&self) -> f64 {
        if self.initial_value > 0.0 {
            self.max_positive_jump / self.initial_value
        } else {
            self.max_positive_jump
        }
    }
}

/// A sampled trajectory together with the tank and Lyapunov traces.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub times: Vec<f64>,
    /// Absolute positions.
    pub states: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub tank_trace: Vec<f64>,
    pub gamma_trace: Vec<f64>,
    /// `½‖x − goal‖² + s`.
    pub lyapunov_trace: Vec<f64>,
    pub converged: bool,
    /// Euler steps taken; traces hold `steps + 1` samples.
    pub steps: usize,
    pub dt: f64,
    pub conv_tol: f64,
}

impl Rollout {
    fn with_capacity(_dim: usize, dt: f64, conv_tol: f64, cap: usize) -> Self {
        Self {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            velocities: Vec::with_capacity(cap),
            tank_trace: Vec::with_capacity(cap),
            gamma_trace: Vec::with_capacity(cap),
            lyapunov_trace: Vec::with_capacity(cap),
            converged: false,
            steps: 0,
            dt,
            conv_tol,
        }
    }

    fn push(&mut self, t: f64, x: DVector<f64>, v: &VelocitySample, s: f64, lyap: f64) {
        self.times.push(t);
        self.states.push(x);
        self.velocities.push(v.xdot.clone());
        self.tank_trace.push(s);
        self.gamma_trace.push(v.gamma);
        self.lyapunov_trace.push(lyap);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV with columns `t,x1..xn,v1..vn,s,gamma,V_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.extend(["s", "gamma", "V_s"].map(String::from));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.states[k].iter().map(|v| v.to_string()));
            row.extend(self.velocities[k].iter().map(|v| v.to_string()));
            row.push(self.tank_trace[k].to_string());
            row.push(self.gamma_trace[k].to_string());
            row.push(self.lyapunov_trace[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::FnField;
    use approx::assert_abs_diff_eq;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn zero_field() -> FnField<impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync> {
        FnField::new(2, |_: &DVector<f64>| DVector::zeros(2))
    }

    fn swirl() -> FnField<impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + Clone> {
        // Outward spiral: injects energy everywhere.
        FnField::new(2, |x: &DVector<f64>| v2(1.5 * x[0] - 4.0 * x[1], 4.0 * x[0] + 1.5 * x[1]))
    }

    #[test]
    fn equilibrium_is_exact() {
        let ds = StabilizedDs::new(swirl(), 50.0, GainParams::default()).unwrap();
        let tank = TankState { s: 0.0, s_bar: 50.0 };
        let v = ds.velocity(&DVector::zeros(2), &tank).unwrap();
        assert_eq!(v.xdot, DVector::zeros(2));
    }

    #[test]
    fn depleted_tank_suppresses_extraction() {
        let ds = StabilizedDs::new(swirl(), 50.0, GainParams::default()).unwrap();
        let x = v2(3.0, -2.0);
        let v = ds.velocity(&x, &TankState { s: 0.0, s_bar: 50.0 }).unwrap();
        assert!(v.z >= 0.01);
        assert_eq!(v.gamma, 0.0);
        assert_eq!(v.xdot, -&x);
    }

    #[test]
    fn zero_field_is_linear() {
        let ds = StabilizedDs::new(zero_field(), 10.0, GainParams::default()).unwrap();
        for x in [v2(1.0, 2.0), v2(-40.0, 3.0)] {
            let v = ds.velocity(&x, &ds.init_tank(&x)).unwrap();
            assert_eq!(v.xdot, -&x);
        }
    }

    #[test]
    fn tank_rest_at_goal() {
        let p = GainParams::default();
        let x = DVector::zeros(2);
        let t = init_tank(&x, 100.0, &p).unwrap();
        assert_eq!(t.s, 0.0);
        let n = tank_step(&t, &x, &x, 0.0, 0.01, &p).unwrap();
        assert_eq!(n.s, 0.0);
    }

    #[test]
    fn tank_initialisation() {
        let p = GainParams::default();
        let t = init_tank(&v2(10f64.sqrt(), 0.0), 1000.0, &p).unwrap();
        assert_abs_diff_eq!(t.s, 632.120_558_828_557_7, epsilon = 1e-9);
        let far = init_tank(&v2(1e3, 0.0), 1000.0, &p).unwrap();
        assert_abs_diff_eq!(far.s, 1000.0, epsilon = 1e-9);
        assert!(init_tank(&v2(1.0, 0.0), -1.0, &p).is_err());
    }

    #[test]
    fn tank_charges_on_dissipation_and_drains_on_extraction() {
        let p = GainParams::default();
        let x = v2(5.0, 0.0);
        let cap = p.kappa_sq(25.0) * 100.0;
        let tank = TankState { s: 0.5 * cap, s_bar: 100.0 };
        let xdot = v2(-1.0, 0.0);

        let r = tank_rate(&tank, &x, &xdot, -3.0, &p);
        assert_eq!(r.branch, TankBranch::Nominal);
        assert_abs_diff_eq!(r.rate, 0.99 * 25.0 + 3.0, epsilon = 1e-12);
        let next = tank_step(&tank, &x, &xdot, -3.0, 0.01, &p).unwrap();
        assert!(next.s > tank.s);

        let r = tank_rate(&tank, &x, &xdot, 40.0, &p);
        assert!(r.rate <= 0.99 * 25.0 - 40.0 + 1e-12);
        let next = tank_step(&tank, &x, &xdot, 40.0, 0.01, &p).unwrap();
        assert!(next.s < tank.s);
    }

    #[test]
    fn full_tank_follows_shrinking_cap() {
        let p = GainParams::default();
        let x = v2(2.0, 0.0);
        let s_bar = 100.0;
        let tank = TankState { s: p.kappa_sq(4.0) * s_bar, s_bar };
        let xdot = v2(-2.0, 0.0);
        // Dissipating field at a full tank: the nominal law would not drop fast enough.
        let r = tank_rate(&tank, &x, &xdot, -0.5, &p);
        assert_eq!(r.branch, TankBranch::FollowCap);
        assert!(r.cap_rate < 0.0);
        let next = tank_step(&tank, &x, &xdot, -0.5, 0.01, &p).unwrap();
        let upper = p.kappa_sq((&x + &xdot * 0.01).norm_squared()) * s_bar;
        assert!(next.s <= upper);
    }

    #[test]
    fn tank_step_rejects_bad_dt() {
        let p = GainParams::default();
        let t = TankState { s: 0.0, s_bar: 1.0 };
        assert!(tank_step(&t, &v2(1.0, 0.0), &v2(0.0, 0.0), 0.0, 0.0, &p).is_err());
    }

    #[test]
    fn linear_rollout_is_geometric() {
        let ds = StabilizedDs::new(zero_field(), 0.0, GainParams::default()).unwrap();
        let settings = IntegrationSettings { dt: 0.1, max_steps: 50, conv_tol: 1e-9 };
        let r = ds.integrate(&v2(1.0, 0.0), &settings).unwrap();
        assert_eq!(r.steps, 50);
        for (k, x) in r.states.iter().enumerate() {
            assert_abs_diff_eq!(x[0], 0.9f64.powi(k as i32), epsilon = 1e-14);
            assert_eq!(x[1], 0.0);
        }
    }

    #[test]
    fn rollout_from_goal_converges_immediately() {
        let ds = StabilizedDs::new(swirl(), 10.0, GainParams::default()).unwrap();
        let r = ds.integrate(&DVector::zeros(2), &IntegrationSettings::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 0);
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn unstable_field_still_converges() {
        let ds = StabilizedDs::new(swirl(), 200.0, GainParams::default()).unwrap();
        let r = ds.integrate(&v2(8.0, -3.0), &IntegrationSettings::default()).unwrap();
        assert!(r.converged);
        let raw = ds.raw_velocity(&v2(8.0, -3.0)).unwrap();
        assert!(v2(8.0, -3.0).dot(&raw) > 0.0, "the raw field must point outward");
        let audit = ds.lyapunov_audit(&r).unwrap();
        assert!(audit.max_bound_violation <= 1e-9 * 200.0);
        assert_eq!(audit.positive_rate_steps, 0);
    }

    #[test]
    fn traces_line_up_and_csv_has_expected_columns() {
        let ds = StabilizedDs::new(swirl(), 20.0, GainParams::default()).unwrap();
        let r = ds.integrate(&v2(2.0, 1.0), &IntegrationSettings::default()).unwrap();
        let n = r.len();
        for len in [r.times.len(), r.velocities.len(), r.tank_trace.len(), r.gamma_trace.len(), r.lyapunov_trace.len()] {
            assert_eq!(len, n);
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x1,x2,v1,v2,s,gamma,V_s");
        assert_eq!(text.lines().count(), n + 1);
    }

    #[test]
    fn goal_translation_is_exact() {
        let goal = v2(-12.5, 40.25);
        let base = StabilizedDs::new(swirl(), 30.0, GainParams::default()).unwrap();
        let shifted = base.clone().with_goal(goal.clone()).unwrap();
        let x0 = v2(3.0, 7.0);
        let settings = IntegrationSettings::default();
        let a = shifted.integrate(&x0, &settings).unwrap();
        let b = base.integrate(&(&x0 - &goal), &settings).unwrap();
        assert_eq!(a.len(), b.len());
        for (sa, sb) in a.states.iter().zip(&b.states) {
            assert_eq!(sa, &(sb + &goal));
        }
        assert_eq!(a.tank_trace, b.tank_trace);
    }

    #[test]
    fn deterministic() {
        let ds = StabilizedDs::new(swirl(), 30.0, GainParams::default()).unwrap();
        let x0 = v2(-6.0, 2.0);
        let a = ds.integrate(&x0, &IntegrationSettings::default()).unwrap();
        let b = ds.integrate(&x0, &IntegrationSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn audit_of_linear_rollout() {
        let ds = StabilizedDs::new(zero_field(), 5.0, GainParams::default()).unwrap();
        let r = ds.integrate(&v2(4.0, -1.0), &IntegrationSettings::default()).unwrap();
        let audit = ds.lyapunov_audit(&r).unwrap();
        assert_eq!(audit.positive_rate_steps, 0);
        assert!(audit.max_positive_jump <= 0.0);
        assert!(audit.max_discrepancy < 0.5, "{audit:?}");
        let fine = ds.integrate(&v2(4.0, -1.0), &IntegrationSettings { dt: 0.005, ..Default::default() }).unwrap();
        let fine_audit = ds.lyapunov_audit(&fine).unwrap();
        assert!(fine_audit.max_discrepancy < 0.6 * audit.max_discrepancy, "{fine_audit:?}");
    }

    #[test]
    fn audit_of_constant_trace() {
        let ds = StabilizedDs::new(zero_field(), 0.0, GainParams::default()).unwrap();
        let x = v2(1.0, 1.0);
        let v = VelocitySample { xdot: DVector::zeros(2), z: 0.0, gamma: 1.0 };
        let mut r = Rollout::with_capacity(2, 0.01, 1e-3, 4);
        for k in 0..4 {
            r.push(k as f64 * 0.01, x.clone(), &v, 0.0, 1.0);
        }
        let audit = ds.lyapunov_audit(&r).unwrap();
        assert_eq!(audit.max_positive_jump, 0.0);
    }
}
