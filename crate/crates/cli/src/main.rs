use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use esds::BackendSpec;
use esds_cli::config::{RunConfig, SBarMode};
use esds_cli::synth::{gen_synthetic, Shape};
use esds_cli::{output, protocol};
use log::{error, info};
use rayon::prelude::*;

/// Learn stable motion generators from demonstrations and benchmark them.
#[derive(Parser)]
#[command(name = "esds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every motion of a corpus, pick K by minimum SEA and write reports.
    Run(RunArgs),
    /// Train once per motion and report SEA for several tank caps.
    Sweep(RunArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
    /// Like `run`, but only write the SVG plots.
    Plot(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Gmr,
    Rbf,
    Gp,
}

#[derive(Args)]
struct RunArgs {
    /// Motion directory, or a directory holding one subdirectory per motion.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// JSON file with a full or partial run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Seed for k-means initialisation and center placement [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores [default: 0].
    #[arg(long)]
    jobs: Option<usize>,
    /// Integration step in seconds [default: 0.01].
    #[arg(long)]
    dt: Option<f64>,
    /// Tank cap: `auto`, a value, or a comma-separated list for `sweep` [default: auto].
    #[arg(long)]
    sbar: Option<SBarMode>,
    /// Regression backend [default: gmr].
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Candidate mixture sizes, comma-separated [default: 4,5,6,7].
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Demonstrations used per motion [default: 3].
    #[arg(long)]
    demos: Option<usize>,
    /// Samples kept per demonstration [default: 100].
    #[arg(long)]
    downsample: Option<usize>,
    /// Step limit per rollout [default: 100000].
    #[arg(long)]
    max_steps: Option<usize>,
    /// Distance to the goal counted as arrival [default: 0.001].
    #[arg(long)]
    conv_tol: Option<f64>,
    /// Score velocities with the raw learned field instead of the tank-gated one.
    #[arg(long)]
    raw_vrmse: bool,
    /// Skip SVG plots.
    #[arg(long)]
    no_plots: bool,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.corpus {
            cfg.corpus = v.clone();
        }
        if let Some(v) = &self.output {
            cfg.output = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.dt {
            cfg.integration.dt = v;
        }
        if let Some(v) = &self.sbar {
            cfg.s_bar = v.clone();
        }
        if let Some(v) = &self.k {
            cfg.k_candidates = v.clone();
        }
        if let Some(b) = self.backend {
            let same = matches!(
                (b, &cfg.backend),
                (Backend::Gmr, BackendSpec::Gmr { .. })
                    | (Backend::Rbf, BackendSpec::Rbf { .. })
                    | (Backend::Gp, BackendSpec::Gp { .. })
            );
            if !same {
                cfg.backend = match b {
                    Backend::Gmr => BackendSpec::gmr(cfg.k_candidates.first().copied().unwrap_or(4)),
                    Backend::Rbf => BackendSpec::rbf(),
                    Backend::Gp => BackendSpec::gp(),
                };
            }
        }
        if let Some(v) = self.demos {
            cfg.demos_used = v;
        }
        if let Some(v) = self.downsample {
            cfg.downsample_t = v;
        }
        if let Some(v) = self.max_steps {
            cfg.integration.max_steps = v;
        }
        if let Some(v) = self.conv_tol {
            cfg.integration.conv_tol = v;
        }
        if self.raw_vrmse {
            cfg.vrmse_tank = esds::TankMode::Disabled;
        }
        if self.no_plots {
            cfg.plots = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Shapes to generate; each goes to its own subdirectory.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "scurve")]
    shape: Vec<Shape>,
    /// Demonstrations per shape.
    #[arg(long, default_value_t = 7)]
    demos: usize,
    /// Samples per demonstration.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Amplitude of the seeded deviations between demonstrations.
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = "corpus")]
    output: PathBuf,
}

fn run(cfg: &RunConfig, plots_only: bool) -> anyhow::Result<bool> {
    let outcomes = protocol::run_corpus(cfg)?;
    let summary = if plots_only {
        for o in outcomes.iter().flatten() {
            output::write_plot(&cfg.output, o)?;
        }
        protocol::CorpusSummary::from_outcomes(&outcomes)
    } else {
        output::write_run(&cfg.output, &outcomes, cfg.plots)?
    };
    for r in &summary.motions {
        info!("{}: SEA {:.2}  Vrmse {:.2}  K {}  fit {:.3}s", r.motion, r.sea, r.vrmse, r.k_selected, r.training_time);
    }
    for f in &summary.failures {
        error!("{}: {}", f.motion, f.error);
    }
    if let Some(agg) = &summary.aggregate {
        println!("SEA {}  Vrmse {}", agg.sea, agg.vrmse);
        if let Some(t) = &agg.training_time {
            println!("training time {:.3} / [{:.3}-{:.3}] s", t.mean, t.min, t.max);
        }
    }
    println!("{} motions ok, {} failed; output in {}", summary.motions.len(), summary.failures.len(), cfg.output.display());
    Ok(summary.failures.is_empty())
}

fn sweep(cfg: &RunConfig) -> anyhow::Result<bool> {
    let SBarMode::Sweep(values) = &cfg.s_bar else {
        bail!("sweep needs --sbar with a comma-separated list of caps");
    };
    let dirs = esds::training::discover_motions(&cfg.corpus)?;
    if dirs.is_empty() {
        bail!("no motions under {}", cfg.corpus.display());
    }
    let results: Vec<_> = cfg.thread_pool().install(|| {
        dirs.par_iter().map(|d| protocol::load_motion(cfg, d).and_then(|m| protocol::sweep_storage(cfg, &m, values))).collect()
    });
    let mut tables = Vec::new();
    let mut ok = true;
    for (dir, r) in dirs.iter().zip(results) {
        match r {
            Ok(t) => {
                for row in &t.rows {
                    println!("{}\ts_bar={}\tSEA={:.3}", t.motion, row.s_bar, row.sea);
                }
                tables.push(t);
            }
            Err(e) => {
                ok = false;
                error!("{}: {e}", dir.display());
            }
        }
    }
    output::write_sweep(&cfg.output, &tables)?;
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => a.resolve().and_then(|c| run(&c, false)),
        Command::Plot(a) => a.resolve().and_then(|c| run(&c, true)),
        Command::Sweep(a) => a.resolve().and_then(|c| sweep(&c)),
        Command::Synth(a) => a
            .shape
            .iter()
            .try_for_each(|&s| {
                let dir = a.output.join(s.name());
                gen_synthetic(&dir, s, a.demos, a.samples, a.noise, a.seed)?;
                println!("wrote {}", dir.display());
                Ok(())
            })
            .map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
