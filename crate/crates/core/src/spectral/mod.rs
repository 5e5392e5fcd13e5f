//! Tensor power method, parameter recovery and the online spectral learner.

mod leader;
mod params;
mod power;
mod recover;

pub use leader::{offline_recover, recover_from_exact, OracleLeader, SpectralConfig, SpectralLeader};
pub use params::{best_permutation, TopicParams, SIMPLEX_TOL};
pub use power::{tensor_power_method, PowerMethodConfig, SpectralFactors, LAMBDA_FLOOR_REL};
pub use recover::recover_params;
