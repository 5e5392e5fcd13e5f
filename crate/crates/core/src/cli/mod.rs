//! Experiment configuration, the runner and offline recovery.

mod config;
mod recover;
mod run;

pub use config::{parse_spec, AlgorithmKind, AlgorithmSpec, ExperimentSpec};
pub use recover::{recover, write_params, RecoverArgs};
pub use run::{mean_metrics, metrics_csv, run, simulate, CellResult, CSV_HEADER};
