//! Seeded synthetic corpora: straight lines, S-curves and arcs ending at the origin.
//!
//! Curved demonstrations share their start point and differ by smooth seeded
//! deviations along the way. Their remaining path fraction `w = 1 − u` obeys
//! `ẇ = −c·w/(w + c)`: nearly constant speed far from the goal and an
//! exponential approach `ẋ ≈ −x` close to it, which keeps the learned
//! correction `κ⁻¹(‖x‖)(ẋ + x)` bounded. They stop at `w = 0.01`, within a
//! unit of the origin.

use std::f64::consts::PI;
use std::path::Path;

use esds::{CorpusManifest, Demonstration, EsdsError};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// `x(t) = x₀·e^{−t}`, already a solution of `ẋ = −x`.
    Line,
    Scurve,
    Arc,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Line => "line",
            Shape::Scurve => "scurve",
            Shape::Arc => "arc",
        }
    }
}

/// Line demonstrations run for this many time constants.
const LINE_SPAN: f64 = 8.0;
/// Cruise rate of the phase; also the remaining fraction where the approach turns exponential.
const CRUISE: f64 = 0.25;
/// Remaining path fraction at the last sample.
const W_END: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
struct Perturbation {
    first: [f64; 2],
    second: [f64; 2],
}

fn duration() -> f64 {
    ((1.0 - W_END) - CRUISE * W_END.ln()) / CRUISE
}

/// Phase `u(t)` and its time derivative. Solves `w + c·ln w = 1 − c·t` by
/// Newton's method in `ln w`, which converges monotonically from `w = 1`.
fn phase(t: f64) -> (f64, f64) {
    let rhs = 1.0 - CRUISE * t;
    let mut y: f64 = 0.0;
    for _ in 0..100 {
        let g = y.exp() + CRUISE * y - rhs;
        let step = g / (y.exp() + CRUISE);
        y -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let w = y.exp();
    (1.0 - w, CRUISE * w / (w + CRUISE))
}

/// Nominal path and its derivative with respect to the phase `u ∈ [0, 1]`.
fn path(shape: Shape, u: f64) -> ([f64; 2], [f64; 2]) {
    match shape {
        Shape::Scurve => {
            let x = -40.0 * (1.0 - u);
            let y = 12.0 * (2.0 * PI * u).sin();
            ([x, y], [40.0, 24.0 * PI * (2.0 * PI * u).cos()])
        }
        Shape::Arc => {
            let phi = PI * (1.0 - u);
            let (r, c) = (20.0, -20.0);
            ([c + r * phi.cos(), r * phi.sin()], [r * PI * phi.sin(), -r * PI * phi.cos()])
        }
        Shape::Line => unreachable!("lines are generated in closed form"),
    }
}

fn perturbed(shape: Shape, u: f64, p: &Perturbation) -> ([f64; 2], [f64; 2]) {
    let (mut pos, mut vel) = path(shape, u);
    let (s1, c1) = (PI * u).sin_cos();
    let (s2, c2) = (2.0 * PI * u).sin_cos();
    for i in 0..2 {
        pos[i] += p.first[i] * s1 + p.second[i] * s2;
        vel[i] += PI * (p.first[i] * c1 + 2.0 * p.second[i] * c2);
    }
    (pos, vel)
}

/// Generate `demos` demonstrations of `samples` points each.
pub fn generate(shape: Shape, demos: usize, samples: usize, noise: f64, seed: u64) -> esds::Result<Vec<Demonstration>> {
    if samples < 10 {
        return Err(EsdsError::InvalidParameter(format!("need at least 10 samples per demonstration, got {samples}")));
    }
    if demos == 0 || !(noise >= 0.0) {
        return Err(EsdsError::InvalidParameter("need demos >= 1 and noise >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym = move || rng.random_range(-1.0..=1.0);
    let mut out = Vec::with_capacity(demos);
    for d in 0..demos {
        let (times, pos, vel) = match shape {
            Shape::Line => {
                let angle = 0.6 + 0.05 * noise * sym();
                let radius = 50.0 * (1.0 - 0.1 * d as f64);
                let x0 = [-radius * angle.cos(), radius * angle.sin()];
                let times: Vec<f64> = (0..samples).map(|i| LINE_SPAN * i as f64 / (samples - 1) as f64).collect();
                let pos: Vec<_> = times.iter().map(|t| DVector::from_vec(vec![x0[0] * (-t).exp(), x0[1] * (-t).exp()])).collect();
                let vel = pos.iter().map(|x| -x).collect();
                (times, pos, vel)
            }
            _ => {
                let p = Perturbation { first: [noise * sym(), noise * sym()], second: [noise * sym(), noise * sym()] };
                let mut times = Vec::with_capacity(samples);
                let mut pos = Vec::with_capacity(samples);
                let mut vel = Vec::with_capacity(samples);
                for i in 0..samples {
                    let t = duration() * i as f64 / (samples - 1) as f64;
                    let (u, du) = phase(t);
                    let (x, dx) = perturbed(shape, u, &p);
                    times.push(t);
                    pos.push(DVector::from_vec(x.to_vec()));
                    vel.push(DVector::from_vec(vec![dx[0] * du, dx[1] * du]));
                }
                (times, pos, vel)
            }
        };
        out.push(Demonstration::new(times, pos, Some(vel))?);
    }
    Ok(out)
}

/// Generate a corpus and write it to `dir`.
pub fn gen_synthetic(
    dir: &Path,
    shape: Shape,
    demos: usize,
    samples: usize,
    noise: f64,
    seed: u64,
) -> esds::Result<CorpusManifest> {
    let generated = generate(shape, demos, samples, noise, seed)?;
    let manifest = CorpusManifest {
        name: shape.name().to_string(),
        dim: 2,
        goal: vec![0.0, 0.0],
        files: (1..=demos).map(|d| format!("demo_{d}.csv")).collect(),
    };
    esds::training::write_corpus(dir, &manifest, &generated)?;
    Ok(manifest)
}
