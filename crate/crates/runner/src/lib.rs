//! Scenario presets, batch execution and persistence for z2dfl simulations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod error;
pub mod run;

pub use config::{preset, ScenarioConfig, Task, PRESETS};
pub use error::RunError;
pub use run::{run_alpha_sweep, run_scenario, AlphaRow, RunManifest};
