//! Seeded Monte Carlo sweeps over the combiner methods.
//!
//! A sweep varies one parameter over a list of values. At every point each
//! trial draws one channel from a seed derived from `(master_seed, point,
//! trial)` and evaluates every configured method on that same realization.

pub mod config;
pub mod engine;
pub mod presets;
pub mod seed;

pub use config::{
    ChannelModel, ExperimentConfig, FixedParams, Method, Metric, PointParams, SweepVariable,
    TheoryOverlay,
};
pub use engine::{
    evaluate_trial, overlay_value, run_sweep, run_sweep_with, run_sweep_with_threads, CellResult,
    RunOptions, Summary, SweepResult, CSV_HEADER,
};
pub use presets::{figure_preset, Preset, Scale};
