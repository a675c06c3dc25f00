use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input: parameters, grids, ladders, drifts outside the regime.
    Config,
    /// A model or boundary the theory (or this crate) does not cover.
    Unsupported,
    /// A certification or numerical verification did not hold.
    Verification,
    /// Memory/IO budget exceeded.
    Resource,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("lag {lag} is outside the tabulated range [0, {max}]")]
    OutOfTableRange { lag: f64, max: f64 },

    #[error("covariance is not positive semidefinite: {0}")]
    NotPositiveDefinite(String),

    #[error("unsupported boundary: {0}")]
    UnsupportedBoundary(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("{what} certification failed: {detail}")]
    CertificationFailed {
        what: &'static str,
        detail: String,
        /// `(abscissa, residual)` pairs the decision was based on.
        residuals: Vec<(f64, f64)>,
    },

    #[error("λ estimation failed: {0}")]
    LambdaEstimation(String),

    #[error("boundary evaluation out of range at y = {y}")]
    Range { y: f64 },

    #[error("eps too large: argument of the logarithm defining γ² is {argument} (must exceed 1)")]
    EpsTooLarge { argument: f64 },

    #[error(
        "no Pickands constant for α = {alpha}: H_α is known in closed form only for α ∈ {{1, 2}}; \
         supply an estimate explicitly"
    )]
    MissingPickandsConstant { alpha: f64 },

    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("lemma hypotheses violated: {}", .0.join("; "))]
    LemmaHypothesesViolated(Vec<String>),

    #[error(
        "circulant embedding failed: minimum eigenvalue {min_eigenvalue:e} at embedding size {size} \
         after padding; try a finer grid or a different model"
    )]
    EmbeddingFailure { min_eigenvalue: f64, size: usize },

    #[error("grid needs {required} points per path, budget is {budget}")]
    ResourceBudget { required: usize, budget: usize },

    #[error("outside the asymptotic regime ({reason}); formula value {value:e}")]
    OutOfRegime { value: f64, reason: String },

    #[error("covariance ordering between the compared processes is not established: {0}")]
    OrderingUndetermined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidParameter { .. }
            | OutOfTableRange { .. }
            | NotPositiveDefinite(_)
            | EpsTooLarge { .. }
            | MissingParameter(_)
            | Precondition(_)
            | OrderingUndetermined(_) => ErrorCategory::Config,
            UnsupportedBoundary(_)
            | UnsupportedModel(_)
            | MissingPickandsConstant { .. }
            | EmbeddingFailure { .. } => ErrorCategory::Unsupported,
            CertificationFailed { .. }
            | LambdaEstimation(_)
            | Range { .. }
            | LemmaHypothesesViolated(_)
            | OutOfRegime { .. } => ErrorCategory::Verification,
            ResourceBudget { .. } | Io(_) | Json(_) => ErrorCategory::Resource,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
