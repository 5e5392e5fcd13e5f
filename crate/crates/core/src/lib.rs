//! Online spectral learning for single-topic bag-of-words models.

mod atomic;
pub mod cli;
pub mod data;
pub mod em;
pub mod error;
pub mod eval;
pub mod exec;
pub mod learner;
pub mod linalg;
pub mod moments;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Execution;
pub use learner::{Fallback, OnlineLearner, StepDiagnostics};
pub use spectral::{SpectralConfig, SpectralLeader, TopicParams};
pub use tensor::{OneHotTriple, SymMatrix, SymTensor3};
