//! Reproduction accuracy: swept error area, velocity RMSE and report tables.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AuditReport, StabilizedDs};
use crate::error::{check_dim, EsdsError, Result};
use crate::regression::VectorField;
use crate::training::Demonstration;

/// `count` points at equal arc-length spacing along the polyline through
/// `states`. Both endpoints are kept exactly.
pub fn resample_equidistant(states: &[DVector<f64>], count: usize) -> Result<Vec<DVector<f64>>> {
    if states.is_empty() {
        return Err(EsdsError::InsufficientData("cannot resample an empty path".into()));
    }
    if count < 2 {
        return Err(EsdsError::InvalidParameter(format!("resampling needs at least 2 points, got {count}")));
    }
    let dim = states[0].len();
    for s in states {
        check_dim(dim, s.len())?;
    }
    let mut cumulative = Vec::with_capacity(states.len());
    cumulative.push(0.0);
    for w in states.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (&w[1] - &w[0]).norm());
    }
    let total = *cumulative.last().unwrap();
    if total == 0.0 {
        return Ok(vec![states[0].clone(); count]);
    }

    let mut out = Vec::with_capacity(count);
    out.push(states[0].clone());
    let mut seg = 0;
    for j in 1..count - 1 {
        let target = total * j as f64 / (count - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let u = if len > 0.0 { ((target - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(&states[seg] + (&states[seg + 1] - &states[seg]) * u);
    }
    out.push(states[states.len() - 1].clone());
    Ok(out)
}

/// Absolute shoelace area of the quadrilateral `a → b → c → d`.
///
/// For the swept error area the vertices are `(e_t, e_{t+1}, d_{t+1}, d_t)`:
/// two consecutive reproduction samples followed by the matching
/// demonstration samples in reverse, which keeps the outline simple when the
/// curves run side by side.
pub fn tetragon_area(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>) -> Result<f64> {
    for p in [a, b, c, d] {
        if p.len() != 2 {
            return Err(EsdsError::DimensionMismatch { expected: 2, got: p.len() });
        }
    }
    let pts = [a, b, c, d];
    let mut twice = 0.0;
    for i in 0..4 {
        let (p, q) = (pts[i], pts[(i + 1) % 4]);
        twice += p[0] * q[1] - q[0] * p[1];
    }
    Ok(0.5 * twice.abs())
}

/// Swept error area between one demonstration and one reproduction of equal length.
pub fn sea_single(demo: &[DVector<f64>], rollout: &[DVector<f64>]) -> Result<f64> {
    if demo.len() != rollout.len() {
        return Err(EsdsError::InvalidParameter(format!(
            "SEA needs equal lengths, demo has {} samples and reproduction {}",
            demo.len(),
            rollout.len()
        )));
    }
    let mut area = 0.0;
    for t in 0..demo.len().saturating_sub(1) {
        area += tetragon_area(&rollout[t], &rollout[t + 1], &demo[t + 1], &demo[t])?;
    }
    Ok(area)
}

/// Summed swept error area over all demonstration/reproduction pairs.
pub fn sea(demos: &[Vec<DVector<f64>>], rollouts: &[Vec<DVector<f64>>]) -> Result<f64> {
    Ok(sea_per_demo(demos, rollouts)?.iter().sum())
}

pub fn sea_per_demo(demos: &[Vec<DVector<f64>>], rollouts: &[Vec<DVector<f64>>]) -> Result<Vec<f64>> {
    if demos.len() != rollouts.len() {
        return Err(EsdsError::InvalidParameter(format!("{} demonstrations but {} reproductions", demos.len(), rollouts.len())));
    }
    demos.iter().zip(rollouts).map(|(d, r)| sea_single(d, r)).collect()
}

/// Resample each reproduction to its demonstration's length, then sum the swept areas.
pub fn sea_resampled(demos: &[Vec<DVector<f64>>], rollouts: &[Vec<DVector<f64>>]) -> Result<Vec<f64>> {
    let resampled: Vec<_> = demos.iter().zip(rollouts).map(|(d, r)| resample_equidistant(r, d.len())).collect::<Result<_>>()?;
    sea_per_demo(demos, &resampled)
}

/// How the tank is treated while scoring velocities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TankMode {
    /// Start full at the first sample and evolve along the demonstrated states.
    #[default]
    Evolved,
    /// Score the unstabilized field `−x + κ·f`.
    Disabled,
}

/// Per-demonstration RMS velocity error. Demonstrations must be expressed
/// relative to the goal of `ds`, as produced by preprocessing.
pub fn vrmse_per_demo<F: VectorField>(demos: &[Demonstration], ds: &StabilizedDs<F>, mode: TankMode) -> Result<Vec<f64>> {
    demos.iter().map(|d| demo_vrmse(d, ds, mode)).collect()
}

/// `Σ_d sqrt(mean_t ‖ẋ_d − ẋ_DS(x_d)‖²)`.
pub fn vrmse<F: VectorField>(demos: &[Demonstration], ds: &StabilizedDs<F>, mode: TankMode) -> Result<f64> {
    Ok(vrmse_per_demo(demos, ds, mode)?.iter().sum())
}

fn demo_vrmse<F: VectorField>(demo: &Demonstration, ds: &StabilizedDs<F>, mode: TankMode) -> Result<f64> {
    let vel = demo.velocities().ok_or(EsdsError::MissingVelocities)?;
    check_dim(ds.dim(), demo.dim())?;
    let xs = demo.positions();
    let ts = demo.times();
    let mut tank = ds.init_tank(&xs[0]);
    let mut sq = 0.0;
    for t in 0..xs.len() {
        let predicted = match mode {
            TankMode::Disabled => ds.raw_velocity(&xs[t])?,
            TankMode::Evolved => {
                let sample = ds.velocity(&xs[t], &tank)?;
                if t + 1 < xs.len() {
                    let dt = ts[t + 1] - ts[t];
                    let moved = (&xs[t + 1] - &xs[t]) / dt;
                    tank = crate::dynamics::tank_step_to(&tank, &xs[t], &moved, sample.z, dt, &xs[t + 1], ds.gain_params())?;
                }
                sample.xdot
            }
        };
        sq += (&vel[t] - predicted).norm_squared();
    }
    Ok((sq / xs.len() as f64).sqrt())
}

/// Condensed Lyapunov audit across all rollouts of one motion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditSummary {
    pub max_relative_jump: f64,
    pub max_bound_violation: f64,
    pub max_discrepancy: f64,
    pub positive_rate_fraction: f64,
}

impl AuditSummary {
    pub fn merge(&mut self, a: &AuditReport) {
        self.max_relative_jump = self.max_relative_jump.max(a.relative_jump());
        self.max_bound_violation = self.max_bound_violation.max(a.max_bound_violation);
        self.max_discrepancy = self.max_discrepancy.max(a.max_discrepancy);
        self.positive_rate_fraction = self.positive_rate_fraction.max(a.positive_rate_fraction());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoMetrics {
    pub sea: f64,
    pub vrmse: f64,
    pub converged: bool,
    pub steps: usize,
}

/// Metrics of one motion at the selected model.
///
/// `training_time` is wall-clock and therefore not part of the JSON form,
/// which stays byte-identical across runs with the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub motion: String,
    pub sea: f64,
    pub vrmse: f64,
    pub k_selected: usize,
    pub s_bar: f64,
    pub per_demo: Vec<DemoMetrics>,
    pub audit: AuditSummary,
    #[serde(skip)]
    pub training_time: f64,
}

impl MetricsReport {
    pub fn all_converged(&self) -> bool {
        self.per_demo.iter().all(|d| d.converged)
    }
}

/// Mean and range of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self { mean, min, max })
    }
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1} / [{:.1}-{:.1}]", self.mean, self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAggregate {
    pub sea: Aggregate,
    pub vrmse: Aggregate,
    #[serde(skip)]
    pub training_time: Option<Aggregate>,
}

impl CorpusAggregate {
    pub fn from_reports(reports: &[MetricsReport]) -> Option<Self> {
        let pick = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
        Some(Self {
            sea: Aggregate::of(&pick(|r| r.sea))?,
            vrmse: Aggregate::of(&pick(|r| r.vrmse))?,
            training_time: Aggregate::of(&pick(|r| r.training_time)),
        })
    }
}

/// One row per motion plus `mean`, `min` and `max` rows.
pub fn write_reports_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["motion", "sea", "vrmse", "training_time", "k_selected", "converged"])?;
    for r in reports {
        w.write_record([
            r.motion.clone(),
            r.sea.to_string(),
            r.vrmse.to_string(),
            r.training_time.to_string(),
            r.k_selected.to_string(),
            r.all_converged().to_string(),
        ])?;
    }
    if let Some(agg) = CorpusAggregate::from_reports(reports) {
        let tt = agg.training_time.expect("non-empty reports");
        for (label, pick) in [
            ("mean", (|a: &Aggregate| a.mean) as fn(&Aggregate) -> f64),
            ("min", |a: &Aggregate| a.min),
            ("max", |a: &Aggregate| a.max),
        ] {
            w.write_record([
                label.to_string(),
                pick(&agg.sea).to_string(),
                pick(&agg.vrmse).to_string(),
                pick(&tt).to_string(),
                String::new(),
                String::new(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
