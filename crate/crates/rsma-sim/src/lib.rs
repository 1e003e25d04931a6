//! Experiment harness around `rsma-core`: scenario generation, Monte Carlo
//! sweeps with paired trials, CSV/JSON export and self-contained SVG charts.

pub mod error;
pub mod export;
pub mod plot;
pub mod scenario;
pub mod sweep;

pub use error::SimError;
pub use scenario::{generate_scenario, GenParams, ScenarioFile};
pub use sweep::{run_sweep, Aggregate, SweepResult, SweepSpec, SweepVariable, TrialRecord};
