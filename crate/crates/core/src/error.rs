use thiserror::Error;

use crate::borsuk::OrthoSolution;
use crate::counterexample::DefectReport;
use crate::projection::ProjectionResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("vector is zero")]
    ZeroVector,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vectors are rank deficient: numerical rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("(1,2) coordinate chart is singular for this subspace")]
    CoordinateChartFailure,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("projection solver did not converge within {budget} iterations")]
    NoConvergence {
        budget: usize,
        best: Box<ProjectionResult>,
    },

    #[error("defect refinement did not converge (best value {best})")]
    DefectNoConvergence { best: f64 },

    #[error("normal span rank is unstable under doubling the sample count: {first} vs {second}")]
    Unstable { first: usize, second: usize },

    #[error("functional vanishes on the subspace (max |f(e)| = {max_abs:e})")]
    DegenerateFunctional { max_abs: f64 },

    #[error("orthogonal unit vector search failed after {restarts} restarts")]
    ExistenceSearchFailed {
        restarts: usize,
        best: Option<Box<OrthoSolution>>,
    },

    #[error("certification budget exhausted before the top basins agreed (omega = {})", .0.omega)]
    BudgetExhausted(Box<DefectReport>),

    #[error("could not draw a subspace away from the coordinate planes in {0} attempts")]
    RejectionBudgetExhausted(usize),

    #[error("rank of the sampled functionals did not saturate: {half} (half sample) vs {full}")]
    RankNotSaturated { half: usize, full: usize },

    #[error("could not draw a transversal subspace in {0} attempts")]
    TransversalityFailure(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable code for the error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSpace(_)
            | Error::ZeroVector
            | Error::DimensionMismatch(_)
            | Error::RankDeficient { .. }
            | Error::CoordinateChartFailure
            | Error::Precondition(_)
            | Error::DegenerateFunctional { .. } => "precondition",
            Error::Parse(_) => "input",
            Error::NoConvergence { .. }
            | Error::DefectNoConvergence { .. }
            | Error::Unstable { .. }
            | Error::ExistenceSearchFailed { .. }
            | Error::BudgetExhausted(_)
            | Error::RejectionBudgetExhausted(_)
            | Error::RankNotSaturated { .. }
            | Error::TransversalityFailure(_) => "no_convergence",
        }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        self.code() == "no_convergence"
    }
}
