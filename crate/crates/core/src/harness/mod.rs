//! Monte-Carlo driver: scenario sampling, trials, sweeps and CSV output.
pub mod config;
pub mod output;
pub mod sample;
pub mod sweep;
pub mod trial;
pub mod validate;

pub use config::{ExperimentConfig, SolverKind, SweepAxis};
pub use sample::sample_scenario;
pub use sweep::{aggregate, run_single, run_sweep, trial_seed, SummaryRow, SweepResult};
pub use trial::{run_trial, TracePoint, TrialOutcome, TrialRecord};
pub use validate::{validate_seed, Check};
