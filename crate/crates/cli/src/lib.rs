//! Experiment runner for sample-rate-offset compensation in stereo
//! reproduction over unsynchronized wireless loudspeakers.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod manifest;
pub mod pipeline;

pub use config::{load_config, Condition, EarMode, PlaybackSource, RunConfig};
pub use manifest::{RunManifest, Summary};
pub use pipeline::{run_condition, run_grid};
