//! Demonstration handling and the learning problem.
//!
//! Demonstrations are expressed relative to their goal, turned into
//! supervised pairs `x ↦ κ⁻¹(‖x‖)(ẋ + x)`, and used once more after fitting to
//! size the energy tank.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::StabilizedDs;
use crate::error::{check_dim, EsdsError, Result};
use crate::gains::GainParams;
use crate::regression::{BackendSpec, RegressionModel, TrainingSet, VectorField};

/// One recorded motion. Positions are stored relative to `goal`.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    times: Vec<f64>,
    positions: Vec<DVector<f64>>,
    velocities: Option<Vec<DVector<f64>>>,
    goal: DVector<f64>,
}

impl Demonstration {
    /// A demonstration in raw coordinates (goal at the frame origin).
    pub fn new(times: Vec<f64>, positions: Vec<DVector<f64>>, velocities: Option<Vec<DVector<f64>>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(EsdsError::InsufficientData("empty demonstration".into()));
        }
        if times.len() != positions.len() {
            return Err(EsdsError::InvalidParameter(format!("{} timestamps for {} positions", times.len(), positions.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(EsdsError::InvalidParameter("timestamps must be finite and strictly increasing".into()));
        }
        let dim = positions[0].len();
        if dim == 0 {
            return Err(EsdsError::InvalidParameter("zero-dimensional positions".into()));
        }
        for p in &positions {
            check_dim(dim, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(EsdsError::InvalidParameter("non-finite position".into()));
            }
        }
        if let Some(v) = &velocities {
            if v.len() != positions.len() {
                return Err(EsdsError::InvalidParameter(format!("{} velocities for {} positions", v.len(), positions.len())));
            }
            for p in v {
                check_dim(dim, p.len())?;
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(EsdsError::InvalidParameter("non-finite velocity".into()));
                }
            }
        }
        Ok(Self { times, positions, velocities, goal: DVector::zeros(dim) })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[DVector<f64>] {
        &self.positions
    }

    pub fn velocities(&self) -> Option<&[DVector<f64>]> {
        self.velocities.as_deref()
    }

    /// Attractor the positions are measured from.
    pub fn goal(&self) -> &DVector<f64> {
        &self.goal
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Positions in the original frame.
    pub fn absolute_positions(&self) -> Vec<DVector<f64>> {
        self.positions.iter().map(|p| p + &self.goal).collect()
    }

    /// Re-express positions relative to `goal`, so the target sits at the origin.
    /// Repeating the call with the same goal is a no-op.
    pub fn translate_to_goal(&self, goal: &DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), goal.len())?;
        if goal.iter().any(|v| !v.is_finite()) {
            return Err(EsdsError::InvalidParameter("goal must be finite".into()));
        }
        let shift = &self.goal - goal;
        Ok(Self {
            times: self.times.clone(),
            positions: self.positions.iter().map(|p| p + &shift).collect(),
            velocities: self.velocities.clone(),
            goal: goal.clone(),
        })
    }

    /// Fill in velocities by finite differences on the timestamps: central
    /// inside, one-sided at the ends. Existing velocities are kept.
    pub fn finite_diff_velocities(&self) -> Result<Self> {
        if self.velocities.is_some() {
            return Ok(self.clone());
        }
        let n = self.len();
        if n < 3 {
            return Err(EsdsError::InsufficientData(format!("finite differences need 3 samples, got {n}")));
        }
        let (t, p) = (&self.times, &self.positions);
        let mut v = Vec::with_capacity(n);
        v.push((&p[1] - &p[0]) / (t[1] - t[0]));
        for i in 1..n - 1 {
            v.push((&p[i + 1] - &p[i - 1]) / (t[i + 1] - t[i - 1]));
        }
        v.push((&p[n - 1] - &p[n - 2]) / (t[n - 1] - t[n - 2]));
        Ok(Self { velocities: Some(v), ..self.clone() })
    }

    /// Keep `target` samples at equispaced indices, first and last included.
    pub fn downsample(&self, target: usize) -> Result<Self> {
        let n = self.len();
        if target < 2 || target > n {
            return Err(EsdsError::InvalidParameter(format!("cannot downsample {n} samples to {target}")));
        }
        let idx = downsample_indices(n, target);
        Ok(Self {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            positions: idx.iter().map(|&i| self.positions[i].clone()).collect(),
            velocities: self.velocities.as_ref().map(|v| idx.iter().map(|&i| v[i].clone()).collect()),
            goal: self.goal.clone(),
        })
    }

    /// Polyline length of the positions.
    pub fn arc_length(&self) -> f64 {
        self.positions.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }

    /// Per-sample integration weights: the gap to the next sample, and the
    /// previous gap for the last one.
    pub fn time_steps(&self) -> Vec<f64> {
        let t = &self.times;
        let n = t.len();
        if n < 2 {
            return vec![0.0; n];
        }
        (0..n).map(|i| if i + 1 < n { t[i + 1] - t[i] } else { t[n - 1] - t[n - 2] }).collect()
    }
}

/// Indices `round(i·(n−1)/(target−1))`, `i = 0..target`.
pub fn downsample_indices(n: usize, target: usize) -> Vec<usize> {
    if target == 1 {
        return vec![0];
    }
    (0..target).map(|i| ((i as f64) * (n - 1) as f64 / (target - 1) as f64).round() as usize).collect()
}

/// Settings for turning demonstrations into a stabilized system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsdsConfig {
    pub gain_params: GainParams,
    /// Integration step in seconds.
    pub dt: f64,
    /// Samples kept per demonstration.
    pub downsample_t: usize,
    /// Fixed tank cap; `None` estimates it from the demonstrations.
    pub s_bar_override: Option<f64>,
    /// Multiplier applied to the estimated cap.
    pub s_bar_scale: f64,
    pub backend: BackendSpec,
}

impl Default for EsdsConfig {
    fn default() -> Self {
        Self {
            gain_params: GainParams::default(),
            dt: 0.01,
            downsample_t: 100,
            s_bar_override: None,
            s_bar_scale: 1.0,
            backend: BackendSpec::gmr(5),
        }
    }
}

impl EsdsConfig {
    pub fn validate(&self) -> Result<()> {
        self.gain_params.validate()?;
        if !(self.dt > 0.0) || self.downsample_t < 2 || !(self.s_bar_scale >= 0.0) {
            return Err(EsdsError::InvalidParameter("need dt > 0, downsample_t >= 2, s_bar_scale >= 0".into()));
        }
        if let Some(s) = self.s_bar_override {
            if !(s >= 0.0) {
                return Err(EsdsError::InvalidParameter(format!("s_bar override must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Goal translation, velocity completion and downsampling.
///
/// Demonstrations shorter than `downsample_t` are kept at full length.
pub fn preprocess(demo: &Demonstration, goal: &DVector<f64>, downsample_t: usize) -> Result<Demonstration> {
    let d = demo.translate_to_goal(goal)?.finite_diff_velocities()?;
    let d = if d.len() > downsample_t { d.downsample(downsample_t)? } else { d };
    let tol = 0.02 * d.arc_length();
    let end = d.positions().last().map_or(0.0, |p| p.norm());
    if end > tol {
        warn!("demonstration ends {end:.4} from its goal (tolerance {tol:.4})");
    }
    Ok(d)
}

/// Supervised pairs `(x, κ⁻¹(‖x‖)(ẋ + x))` over all demonstrations, in order.
pub fn build_training_pairs(demos: &[Demonstration], params: &GainParams) -> Result<TrainingSet> {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for d in demos {
        let vel = d.velocities().ok_or(EsdsError::MissingVelocities)?;
        for (x, v) in d.positions().iter().zip(vel) {
            let k_inv = params.kappa_inv(x.norm())?;
            targets.push((v + x) * k_inv);
            inputs.push(x.clone());
        }
    }
    TrainingSet::new(inputs, targets)
}

/// Velocity implied by a training target: `−x + κ(‖x‖)·target`.
pub fn reconstruct_velocity(x: &DVector<f64>, target: &DVector<f64>, params: &GainParams) -> DVector<f64> {
    -x + target * params.kappa_sq(x.norm_squared())
}

/// Worst-case energy drawn from the tank along any demonstration:
/// `max_d Σ_t max(0, z_dᵗ)·δt`, with `z = κ(‖x‖)·xᵀf(x)`.
pub fn estimate_storage_cap<F: VectorField>(demos: &[Demonstration], field: &F, params: &GainParams) -> Result<f64> {
    if demos.is_empty() {
        return Err(EsdsError::InsufficientData("no demonstrations to size the tank".into()));
    }
    let mut best: f64 = 0.0;
    for d in demos {
        let mut total = 0.0;
        for (x, dt) in d.positions().iter().zip(d.time_steps()) {
            let f = field.predict(x)?;
            let z = params.z_power(x, &f)?;
            total += z.max(0.0) * dt;
        }
        best = best.max(total);
    }
    Ok(best)
}

/// Fit the configured backend on preprocessed demonstrations and size the tank.
pub fn train(demos: &[Demonstration], config: &EsdsConfig, seed: u64) -> Result<StabilizedDs<RegressionModel>> {
    config.validate()?;
    let data = build_training_pairs(demos, &config.gain_params)?;
    let model = config.backend.fit(&data, seed)?;
    let s_bar = match config.s_bar_override {
        Some(s) => s,
        None => config.s_bar_scale * estimate_storage_cap(demos, &model, &config.gain_params)?,
    };
    StabilizedDs::new(model, s_bar, config.gain_params)
}

/// `corpus.json` manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub dim: usize,
    pub goal: Vec<f64>,
    pub files: Vec<String>,
}

/// A loaded motion: manifest plus raw demonstrations.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub demos: Vec<Demonstration>,
}

impl Corpus {
    pub fn goal(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.manifest.goal)
    }
}

pub const MANIFEST_FILE: &str = "corpus.json";

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest: CorpusManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    check_dim(manifest.dim, manifest.goal.len())?;
    if manifest.files.is_empty() {
        return Err(EsdsError::InsufficientData(format!("corpus {} lists no files", manifest.name)));
    }
    let demos = manifest
        .files
        .iter()
        .map(|f| {
            let d = read_demonstration_csv(&dir.join(f))?;
            check_dim(manifest.dim, d.dim())?;
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { manifest, demos })
}

pub fn write_corpus(dir: &Path, manifest: &CorpusManifest, demos: &[Demonstration]) -> Result<()> {
    if manifest.files.len() != demos.len() {
        return Err(EsdsError::InvalidParameter("manifest and demonstrations disagree".into()));
    }
    fs::create_dir_all(dir)?;
    for (f, d) in manifest.files.iter().zip(demos) {
        write_demonstration_csv(&dir.join(f), d)?;
    }
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

/// Subdirectories of `root` that hold a manifest, sorted by path; or `root`
/// itself if it is a motion directory.
pub fn discover_motions(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> =
        fs::read_dir(root)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join(MANIFEST_FILE).is_file()).collect();
    dirs.sort();
    Ok(dirs)
}

/// Read `t,x1..xn[,v1..vn]`. Positions are taken as raw coordinates.
pub fn read_demonstration_csv(path: &Path) -> Result<Demonstration> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = rdr.headers()?.clone();
    let cols = header.len();
    let bad_header = || EsdsError::Format(format!("{}: header must be t,x1..xn[,v1..vn]", path.display()));
    if cols < 2 || header.get(0) != Some("t") {
        return Err(bad_header());
    }
    let n = if header.iter().any(|h| h.starts_with('v')) { (cols - 1) / 2 } else { cols - 1 };
    let has_vel = cols == 1 + 2 * n && header.iter().any(|h| h.starts_with('v'));
    for i in 0..n {
        if header.get(1 + i) != Some(format!("x{}", i + 1).as_str()) {
            return Err(bad_header());
        }
        if has_vel && header.get(1 + n + i) != Some(format!("v{}", i + 1).as_str()) {
            return Err(bad_header());
        }
    }
    if cols != 1 + n + if has_vel { n } else { 0 } {
        return Err(bad_header());
    }
    let mut times = Vec::new();
    let mut pos = Vec::new();
    let mut vel = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| EsdsError::Format(format!("{}: {s:?}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        times.push(vals[0]);
        pos.push(DVector::from_column_slice(&vals[1..1 + n]));
        if has_vel {
            vel.push(DVector::from_column_slice(&vals[1 + n..1 + 2 * n]));
        }
    }
    Demonstration::new(times, pos, has_vel.then_some(vel))
}

/// Write absolute positions (and velocities, if any) as CSV.
pub fn write_demonstration_csv(path: &Path, demo: &Demonstration) -> Result<()> {
    let n = demo.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    if demo.velocities().is_some() {
        header.extend((1..=n).map(|i| format!("v{i}")));
    }
    w.write_record(&header)?;
    let abs = demo.absolute_positions();
    for i in 0..demo.len() {
        let mut row = vec![demo.times()[i].to_string()];
        row.extend(abs[i].iter().map(|v| v.to_string()));
        if let Some(v) = demo.velocities() {
            row.extend(v[i].iter().map(|c| c.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
