//! Benchmark harness around the `esds` library: corpus runs with model
//! selection, cap sweeps, synthetic corpora and SVG plots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod plot;
pub mod protocol;
pub mod synth;

pub use config::{RunConfig, SBarMode};
pub use protocol::{load_motion, run_corpus, run_motion, sweep_storage, CorpusSummary, Motion, MotionOutcome};
