//! Multi-objective analysis of MDPs and Markov automata.

mod analysis;
pub mod objective;
mod product;
mod qualitative;
mod refine;
pub mod scheduler;
mod solve;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::model::ModelError;
use crate::transform::TransformError;

pub use analysis::{
    achievability, analyze, numerical_query, pareto, prepare, route, AchievabilityResult, AnalysisOptions, GapReport,
    NumericalResult, Plan, Prepared, QueryOutcome, Verdict, TIME_REWARD,
};
pub use qualitative::qualitative_reach;
pub use refine::{pareto_refine, ApproxResult, RefineStatus, Refiner};
pub use scheduler::{DeterministicScheduler, SchedulerDescription, SchedulerMode};
pub use solve::{
    preprocess_end_components, weighted_value_iteration, InfinityReport, MultiObjectiveProblem, WeightedSolve, MAX_SWEEPS,
    MIN_REWARD_WEIGHT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("objective {0} has an infinite optimal value")]
    InfiniteValue(usize),
    #[error("value iteration did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: u64 },
    #[error("invalid weight vector {0:?}")]
    InvalidWeights(Vec<f64>),
    #[error("the thresholds on the remaining objectives are not achievable")]
    Infeasible,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl EngineError {
    /// Stable machine-readable name of the error.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::InfiniteValue(_) => "InfiniteValue",
            EngineError::NonConvergence { .. } => "NonConvergence",
            EngineError::InvalidWeights(_) => "InvalidWeights",
            EngineError::Infeasible => "Infeasible",
            EngineError::Unsupported(_) => "Unsupported",
            EngineError::Transform(e) => e.code(),
            EngineError::Geometry(e) => e.code(),
            EngineError::Model(e) => e.code(),
        }
    }
}
