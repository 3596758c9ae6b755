//! The benchmark protocol: per-motion model selection, corpus runs and cap sweeps.

use std::path::Path;
use std::time::Instant;

use esds::metrics::{self, AuditSummary, CorpusAggregate, DemoMetrics};
use esds::training::{self, build_training_pairs, estimate_storage_cap, preprocess};
use esds::{Demonstration, EsdsError, IntegrationSettings, MetricsReport, RegressionModel, Rollout, StabilizedDs};
use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SBarMode};

/// One motion ready for fitting: preprocessed demonstrations relative to the goal.
#[derive(Debug, Clone)]
pub struct Motion {
    pub name: String,
    pub goal: DVector<f64>,
    pub demos: Vec<Demonstration>,
}

impl Motion {
    pub fn absolute_demos(&self) -> Vec<Vec<DVector<f64>>> {
        self.demos.iter().map(Demonstration::absolute_positions).collect()
    }
}

pub fn load_motion(config: &RunConfig, dir: &Path) -> esds::Result<Motion> {
    let corpus = training::load_corpus(dir)?;
    let goal = corpus.goal();
    let demos = corpus
        .demos
        .iter()
        .take(config.demos_used)
        .map(|d| preprocess(d, &goal, config.downsample_t))
        .collect::<esds::Result<Vec<_>>>()?;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| corpus.manifest.name.clone());
    Ok(Motion { name, goal, demos })
}

/// A fitted system with its cap estimate and the fit duration.
#[derive(Debug, Clone)]
pub struct Trained {
    pub ds: StabilizedDs<RegressionModel>,
    /// Cap estimated from the demonstrations, whatever cap the system uses.
    pub s_bar_estimate: f64,
    pub training_time: f64,
    pub k: usize,
}

/// Fit one model. `k == 0` keeps the configured backend unchanged.
pub fn train_motion(config: &RunConfig, motion: &Motion, k: usize) -> esds::Result<Trained> {
    let data = build_training_pairs(&motion.demos, &config.gain_params)?;
    let backend = if k == 0 { config.backend.clone() } else { config.backend.with_k(k) };
    let start = Instant::now();
    let model = backend.fit(&data, config.seed)?;
    let training_time = start.elapsed().as_secs_f64();
    let estimate = estimate_storage_cap(&motion.demos, &model, &config.gain_params)?;
    let s_bar = match config.s_bar {
        SBarMode::Fixed(v) => v,
        _ => estimate,
    };
    let ds = StabilizedDs::new(model, s_bar, config.gain_params)?.with_goal(motion.goal.clone())?;
    Ok(Trained { ds, s_bar_estimate: estimate, training_time, k })
}

/// Rollouts from each demonstration's start and the per-demonstration SEA.
pub fn reproduce(
    ds: &StabilizedDs<RegressionModel>,
    motion: &Motion,
    settings: &IntegrationSettings,
) -> esds::Result<(Vec<Rollout>, Vec<f64>)> {
    let demos = motion.absolute_demos();
    let rollouts = demos.iter().map(|d| ds.integrate(&d[0], settings)).collect::<esds::Result<Vec<_>>>()?;
    let states: Vec<_> = rollouts.iter().map(|r| r.states.clone()).collect();
    let sea = metrics::sea_resampled(&demos, &states)?;
    Ok((rollouts, sea))
}

/// Report plus the artifacts needed for plots and rollout files.
#[derive(Debug, Clone)]
pub struct MotionOutcome {
    pub report: MetricsReport,
    pub motion: Motion,
    pub trained: Trained,
    pub rollouts: Vec<Rollout>,
}

struct Candidate {
    trained: Trained,
    rollouts: Vec<Rollout>,
    sea: Vec<f64>,
}

fn total(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// Fit every candidate size, keep the one with the smallest SEA and score it.
pub fn run_motion(config: &RunConfig, motion: Motion) -> esds::Result<MotionOutcome> {
    if let SBarMode::Sweep(_) = config.s_bar {
        return Err(EsdsError::InvalidParameter("a cap sweep belongs to the sweep command".into()));
    }
    let candidates: Vec<esds::Result<Candidate>> = config
        .effective_k()
        .into_par_iter()
        .map(|k| {
            let trained = train_motion(config, &motion, k)?;
            let (rollouts, sea) = reproduce(&trained.ds, &motion, &config.integration)?;
            info!("{}: K={k} SEA={:.3}", motion.name, total(&sea));
            Ok(Candidate { trained, rollouts, sea })
        })
        .collect();

    let mut best: Option<Candidate> = None;
    let mut last_err = None;
    for c in candidates {
        match c {
            Ok(c) => {
                // Strict comparison keeps the smallest K on ties; NaN never wins.
                if best.as_ref().is_none_or(|b| total(&c.sea) < total(&b.sea)) {
                    best = Some(c);
                }
            }
            Err(e) => {
                warn!("{}: candidate failed: {e}", motion.name);
                last_err = Some(e);
            }
        }
    }
    let Some(best) = best else {
        return Err(last_err.unwrap_or_else(|| EsdsError::InsufficientData("no candidates".into())));
    };

    let vrmse = metrics::vrmse_per_demo(&motion.demos, &best.trained.ds, config.vrmse_tank)?;
    let mut audit = AuditSummary::default();
    for r in &best.rollouts {
        audit.merge(&best.trained.ds.lyapunov_audit(r)?);
    }
    let per_demo = best
        .rollouts
        .iter()
        .zip(&best.sea)
        .zip(&vrmse)
        .map(|((r, &sea), &vrmse)| DemoMetrics { sea, vrmse, converged: r.converged, steps: r.steps })
        .collect();
    let report = MetricsReport {
        motion: motion.name.clone(),
        sea: total(&best.sea),
        vrmse: total(&vrmse),
        k_selected: best.trained.k,
        s_bar: best.trained.ds.s_bar(),
        per_demo,
        audit,
        training_time: best.trained.training_time,
    };
    Ok(MotionOutcome { report, motion, trained: best.trained, rollouts: best.rollouts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionFailure {
    pub motion: String,
    pub error: String,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub motions: Vec<MetricsReport>,
    pub failures: Vec<MotionFailure>,
    pub aggregate: Option<CorpusAggregate>,
}

impl CorpusSummary {
    pub fn from_outcomes(outcomes: &[Result<MotionOutcome, MotionFailure>]) -> Self {
        let motions: Vec<_> = outcomes.iter().filter_map(|o| o.as_ref().ok()).map(|o| o.report.clone()).collect();
        let failures = outcomes.iter().filter_map(|o| o.as_ref().err()).cloned().collect();
        let aggregate = CorpusAggregate::from_reports(&motions);
        Self { motions, failures, aggregate }
    }
}

fn motion_label(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Run every motion under `config.corpus`. A failing motion is recorded and
/// the others still run.
pub fn run_corpus(config: &RunConfig) -> esds::Result<Vec<Result<MotionOutcome, MotionFailure>>> {
    config.validate()?;
    let dirs = training::discover_motions(&config.corpus)?;
    if dirs.is_empty() {
        return Err(EsdsError::InsufficientData(format!("no motions under {}", config.corpus.display())));
    }
    let pool = config.thread_pool();
    Ok(pool.install(|| {
        dirs.par_iter()
            .map(|dir| {
                load_motion(config, dir)
                    .and_then(|m| run_motion(config, m))
                    .map_err(|e| MotionFailure { motion: motion_label(dir), error: e.to_string() })
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s_bar: f64,
    pub sea: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub motion: String,
    pub k: usize,
    pub s_bar_estimate: f64,
    pub rows: Vec<SweepRow>,
}

/// SEA of one trained field under several caps.
pub fn sweep_trained(
    trained: &Trained,
    motion: &Motion,
    values: &[f64],
    settings: &IntegrationSettings,
) -> esds::Result<Vec<SweepRow>> {
    values
        .par_iter()
        .map(|&s_bar| {
            let ds = trained.ds.with_s_bar(s_bar)?;
            let (rollouts, sea) = reproduce(&ds, motion, settings)?;
            Ok(SweepRow { s_bar, sea: total(&sea), converged: rollouts.iter().all(|r| r.converged) })
        })
        .collect()
}

/// Train once with the first candidate size, then integrate under each cap.
pub fn sweep_storage(config: &RunConfig, motion: &Motion, values: &[f64]) -> esds::Result<SweepTable> {
    if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
        return Err(EsdsError::InvalidParameter("sweep needs non-negative cap values".into()));
    }
    let k = config.effective_k()[0];
    let trained = train_motion(config, motion, k)?;
    let rows = sweep_trained(&trained, motion, values, &config.integration)?;
    Ok(SweepTable { motion: motion.name.clone(), k, s_bar_estimate: trained.s_bar_estimate, rows })
}
