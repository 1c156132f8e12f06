//! Experiment orchestration: config files, single runs, sweeps, comparisons, and
//! figure-data export, plus the command-line interface over all of it.
//!
//! The submodules layer strictly: [`config`] turns a TOML file into model specs and
//! run settings; [`runner`] executes one (network, method) job into a
//! [`SimulationResult`] and (de)serializes it as CSV; [`sweep`] fans a grid of
//! parameter overrides across methods and reduces the outcomes into a
//! [`ComparisonReport`] with transition estimates; [`figures`] reshapes results into
//! tidy per-figure tables; [`cli`] maps subcommands onto those entry points and
//! errors onto exit codes.
//!
//! Everything downstream of a seed is deterministic: sweeps enumerate their grid in
//! row-major order, each grid point derives its own sub-seed by index, trajectory
//! ensembles are reduced in trajectory order, and all maps iterate in lexicographic
//! key order. Outputs are byte-identical across repeats and worker counts.

pub mod cli;
pub mod config;
pub mod figures;
pub mod runner;
pub mod sweep;

pub use cli::cli_main;
pub use config::{load_config, ConfigDoc, RunSettings, RunSpec};
pub use figures::{emit_figure, FigureId, Table};
pub use runner::{execute, run_single, Method, RunMetadata, SimulationResult};
pub use sweep::{
    estimate_transition, run_sweep, ComparisonPoint, ComparisonReport, PointOutcome, SweepAxis,
    SweepPlan, TransitionEstimate,
};
