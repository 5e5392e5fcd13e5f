use std::fmt;

use crate::error::Result;
use crate::spectral::TopicParams;
use crate::tensor::OneHotTriple;

/// A fallback taken while producing a step's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// Too few observations for the requested topic count.
    WarmUp,
    /// The second moment had only `usable` positive eigenvalues.
    RankDeficient { usable: usize },
    /// The power method found only `extracted` positive components.
    DegenerateDecomposition { extracted: usize },
    /// `dropped` topics had no mass left after clamping.
    DegenerateRecovery { dropped: usize },
    /// The eigensolver failed to converge.
    NoConvergence,
    /// Nothing usable was recovered; the previous parameters were reused.
    Reused,
    /// Nothing usable was recovered and no previous parameters existed.
    Uniform,
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fallback::WarmUp => write!(f, "warmup"),
            Fallback::RankDeficient { usable } => write!(f, "rank={usable}"),
            Fallback::DegenerateDecomposition { extracted } => write!(f, "decomp={extracted}"),
            Fallback::DegenerateRecovery { dropped } => write!(f, "dropped={dropped}"),
            Fallback::NoConvergence => write!(f, "noconv"),
            Fallback::Reused => write!(f, "reused"),
            Fallback::Uniform => write!(f, "uniform"),
        }
    }
}

/// Per-step record of what the learner had to do.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    pub fallbacks: Vec<Fallback>,
    /// Negative word probabilities were clamped during recovery.
    pub clamped: bool,
}

impl StepDiagnostics {
    pub fn with(fallback: Fallback) -> Self {
        StepDiagnostics {
            fallbacks: vec![fallback],
            clamped: false,
        }
    }

    /// `+`-joined fallback labels; empty when none were taken.
    pub fn label(&self) -> String {
        self.fallbacks.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("+")
    }
}

/// An online learner evaluated prequentially: `step` returns the parameters
/// used to predict `x`, learned from earlier observations only, and then
/// absorbs `x`.
pub trait OnlineLearner: Send {
    fn step(&mut self, x: &OneHotTriple) -> Result<(TopicParams, StepDiagnostics)>;
}
