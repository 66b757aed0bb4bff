//! Crate-wide error type and result alias.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants are
//! grouped by how the CLI reports them: input/validation problems exit with
//! code 2, an infeasible placement region exits with code 3, and numerical
//! failures (singular covariances, degenerate fits, vanished posteriors)
//! exit with code 4. See [`Error::exit_code`].

use crate::detection::DetectionModel;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All error conditions surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation that requires at least one element received none.
    #[error("empty set: {0}")]
    EmptySet(&'static str),

    /// A polygon region failed validation (too few vertices, zero area, ...).
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    /// An importance-sampling proposal assigned zero density to a sample.
    #[error("proposal density is zero at event index {index}; importance weights undefined")]
    UnsupportedSample {
        /// Index of the offending event in the input list.
        index: usize,
    },

    /// A travel-time query lies outside the velocity model's validity.
    #[error("out of model: {0}")]
    OutOfModel(String),

    /// A surrogate was evaluated outside the domain it was fitted on.
    #[error("out of fitted domain: {what} = {value} not in [{lo}, {hi}]")]
    OutOfDomain {
        /// Which coordinate violated the fit domain.
        what: &'static str,
        /// The offending value.
        value: f64,
        /// Lower edge of the fitted range.
        lo: f64,
        /// Upper edge of the fitted range.
        hi: f64,
    },

    /// A surrogate fit grid does not determine the polynomial coefficients.
    #[error("degenerate fit grid: {0}")]
    DegenerateGrid(String),

    /// A correlation was requested where a standard deviation is zero.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// Generic input/validation failure with a human-readable message.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two paired sequences disagree in length.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Length required by the operation.
        expected: usize,
        /// Length actually supplied.
        got: usize,
    },

    /// A covariance matrix is not positive definite even after the nugget.
    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    /// Every posterior weight underflowed to zero; the support cannot
    /// explain the dataset at all.
    #[error("zero posterior mass: no support event has positive likelihood")]
    ZeroPosteriorMass,

    /// KL divergence is undefined: posterior mass sits on zero-prior support.
    #[error("absolute continuity violated: posterior mass on zero-prior event index {index}")]
    AbsoluteContinuity {
        /// Index of the support event with zero prior but positive posterior.
        index: usize,
    },

    /// A placement region contains no feasible candidate points.
    #[error("infeasible region: {0}")]
    InfeasibleRegion(String),

    /// The detection-model fit did not converge because the catalog is
    /// (near-)perfectly separable; coefficients were clamped.
    #[error(
        "detection fit non-converged (separable data); clamped coefficients: \
         alpha={} beta={} gamma_m={} delta0={}",
        model.alpha, model.beta, model.gamma_m, model.delta0
    )]
    SeparableDetectionFit {
        /// Best clamped model found before the fit was abandoned.
        model: DetectionModel,
    },

    /// Underlying file I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// CSV (de)serialization failure.
    #[cfg(feature = "cli")]
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error.
    ///
    /// 2 = input error, 3 = infeasible region, 4 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleRegion(_) => 3,
            Error::SingularCovariance(_)
            | Error::ZeroPosteriorMass
            | Error::DegenerateGrid(_)
            | Error::UndefinedCorrelation(_)
            | Error::SeparableDetectionFit { .. } => 4,
            _ => 2,
        }
    }
}
