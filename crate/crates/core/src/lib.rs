//! Learn a velocity field from demonstrations and run it as a globally
//! stable motion generator.
//!
//! ```
//! use esds::{Demonstration, EsdsConfig, IntegrationSettings, train};
//! use nalgebra::DVector;
//!
//! let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
//! let positions: Vec<_> = times
//!     .iter()
//!     .map(|t| DVector::from_vec(vec![3.0 * (-t).exp(), (2.0 * t).sin() * (-t).exp()]))
//!     .collect();
//! let demo = Demonstration::new(times, positions, None)?.finite_diff_velocities()?;
//!
//! let ds = train(&[demo], &EsdsConfig::default(), 7)?;
//! let rollout = ds.integrate(&DVector::from_vec(vec![3.0, 0.0]), &IntegrationSettings::default())?;
//! assert!(rollout.converged);
//! # Ok::<(), esds::EsdsError>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
mod error;
pub mod gains;
pub mod metrics;
pub mod regression;
pub mod training;

pub use dynamics::{AuditReport, IntegrationSettings, Rollout, StabilizedDs, TankState};
pub use error::{EsdsError, Result};
pub use gains::GainParams;
pub use metrics::{MetricsReport, TankMode};
pub use regression::{BackendSpec, RegressionModel, TrainingSet, VectorField};
pub use training::{train, Corpus, CorpusManifest, Demonstration, EsdsConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tank.md")]
    mod tank {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/rollouts.md")]
    mod rollouts {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
