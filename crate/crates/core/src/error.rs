use thiserror::Error;

use crate::solvers::SolverTrace;

pub type Result<T> = std::result::Result<T, Error>;

/// Step-size conditions checked before a solver is allowed to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepCondition {
    /// `mu` must lie in `[(1-beta)/rho, (1+beta)/kappa)`.
    FbsStepWindow,
    /// `beta` must lie in `((kappa-rho)/(kappa+rho), 1)`.
    FbsBetaWindow,
    /// Dual step bound `sigma <= rho*beta / (|L|^2 (1-beta))`.
    PrimalDualSigma,
    /// Primal step bound `tau (sigma |L|^2 + kappa/2) < 1`.
    PrimalDualTau,
    /// Heuristic plug-in needs `1/(mu sigma) < lambda2`.
    HeuristicThreshold,
}

impl std::fmt::Display for StepCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StepCondition::FbsStepWindow => "FBS step-size window",
            StepCondition::FbsBetaWindow => "FBS cocoercivity window",
            StepCondition::PrimalDualSigma => "primal-dual condition (i)",
            StepCondition::PrimalDualTau => "primal-dual condition (ii)",
            StepCondition::HeuristicThreshold => "heuristic threshold ordering",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("supremum not attained inside the search interval (unbounded conjugate?)")]
    UnboundedSup,

    #[error("overdetermined case required: smallest eigenvalue of A^T A is {0:e}")]
    OverdeterminedRequired(f64),

    #[error("{condition} violated: {detail}")]
    StepSize {
        condition: StepCondition,
        detail: String,
    },

    #[error("iteration diverged at step {iteration}")]
    Divergence {
        iteration: usize,
        trace: Box<SolverTrace>,
    },

    #[error("sweep aborted after {completed} trials: {source}")]
    SweepAborted {
        completed: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
