//! Experiment plumbing: configuration, phantoms, sweeps and file output.

pub mod checks;
pub mod config;
pub mod export;
pub mod phantom;
pub mod report;
pub mod run;
pub mod stats;

pub use config::{load_config, preset, ExperimentConfig, SweepAxis};
pub use export::{export_image, read_exported};
pub use phantom::make_phantom;
pub use run::{run_cell, run_sweep, simulate, CellOutcome, SweepResult, SweepRow};
pub use report::FeasibilityReport;
