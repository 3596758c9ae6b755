use std::path::{Path, PathBuf};

use esds::{BackendSpec, EsdsError, GainParams, IntegrationSettings, TankMode};
use serde::{Deserialize, Serialize};

/// How the tank cap is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SBarMode {
    /// Estimate from the demonstrations.
    #[default]
    Auto,
    Fixed(f64),
    /// One run per value (`sweep` subcommand).
    Sweep(Vec<f64>),
}

impl std::str::FromStr for SBarMode {
    type Err = String;

    /// `auto`, a single number, or a comma-separated list.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad s_bar value {v:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(format!("s_bar values must be finite and >= 0, got {v}"));
        }
        match values.as_slice() {
            [v] if !s.contains(',') => Ok(Self::Fixed(*v)),
            _ => Ok(Self::Sweep(values)),
        }
    }
}

/// Everything a benchmark run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// A motion directory or a directory of motion directories.
    pub corpus: PathBuf,
    pub output: PathBuf,
    pub backend: BackendSpec,
    /// Mixture sizes tried per motion; the one with the smallest SEA wins.
    /// Ignored by non-mixture backends.
    pub k_candidates: Vec<usize>,
    pub demos_used: usize,
    pub downsample_t: usize,
    pub integration: IntegrationSettings,
    pub s_bar: SBarMode,
    pub gain_params: GainParams,
    pub seed: u64,
    pub vrmse_tank: TankMode,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("corpus"),
            output: PathBuf::from("out"),
            backend: BackendSpec::gmr(4),
            k_candidates: vec![4, 5, 6, 7],
            demos_used: 3,
            downsample_t: 100,
            integration: IntegrationSettings::default(),
            s_bar: SBarMode::Auto,
            gain_params: GainParams::default(),
            seed: 0,
            vrmse_tank: TankMode::Evolved,
            jobs: 0,
            plots: true,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> esds::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> esds::Result<()> {
        let bad = |m: String| Err(EsdsError::InvalidParameter(m));
        if self.k_candidates.is_empty() || self.k_candidates.contains(&0) {
            return bad(format!("k_candidates must be non-empty positive integers, got {:?}", self.k_candidates));
        }
        if self.demos_used == 0 {
            return bad("demos_used must be >= 1".into());
        }
        if self.downsample_t < 2 {
            return bad(format!("downsample_t must be >= 2, got {}", self.downsample_t));
        }
        let IntegrationSettings { dt, max_steps, conv_tol } = self.integration;
        if !(dt > 0.0) || !(conv_tol > 0.0) || max_steps == 0 {
            return bad(format!("invalid integration settings dt={dt} conv_tol={conv_tol} max_steps={max_steps}"));
        }
        match &self.s_bar {
            SBarMode::Fixed(v) if !(*v >= 0.0) => return bad(format!("s_bar must be >= 0, got {v}")),
            SBarMode::Sweep(v) if v.is_empty() || v.iter().any(|x| !(*x >= 0.0)) => {
                return bad("s_bar sweep needs non-negative values".into())
            }
            _ => {}
        }
        self.gain_params.validate()
    }

    /// Mixture sizes actually fitted for this backend.
    pub fn effective_k(&self) -> Vec<usize> {
        match self.backend {
            BackendSpec::Gmr { .. } => self.k_candidates.clone(),
            _ => vec![0],
        }
    }

    pub fn thread_pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build().expect("thread pool")
    }
}
