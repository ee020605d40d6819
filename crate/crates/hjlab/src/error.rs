//! Crate-wide error type.
//!
//! Every fallible operation returns [`HjError`].  Variants are grouped
//! loosely by the stage that raises them: input validation, horizon and
//! stability checks, root finding, and front/section geometry.

use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum HjError {
    /// Malformed or inconsistent configuration (dimensions, boxes, params).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A rectangle with lo >= hi on some axis, or mismatched dimension.
    #[error("empty or inconsistent box: {0}")]
    EmptyBox(String),

    /// Requested time at or beyond the classical horizon 1/(BC).
    #[error("time {t} is at or beyond the classical horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    /// A Newton or bisection solve failed to reach its residual target.
    #[error("root solve failed to converge: {0}")]
    NoConvergence(String),

    /// Branch parametrization is singular at the requested parameter.
    #[error("degenerate branch parameter: {0}")]
    DegenerateParam(String),

    /// Operation is not defined for this branch or data kind.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A front fiber over a query point contains no sampled points.
    #[error("empty front fiber over q = {0:?}")]
    EmptyFiber(Vec<f64>),

    /// Two curve crossings inside one grid cell; the grid cannot separate them.
    #[error("section resolution too coarse near q = {0}")]
    ResolutionTooCoarse(f64),

    /// More continuous sections than the enumeration cap allows.
    #[error("more than {0} continuous sections")]
    SectionOverflow(usize),

    /// The entropy-pair search exhausted its perturbation retries.
    #[error("no entropy pair found: {0}")]
    EntropyPairNotFound(String),

    /// Time step violates the CFL bound of the monotone scheme.
    #[error("CFL violation: dt * sum(theta_i/dx_i) = {0} > 1")]
    CflViolation(f64),

    /// The scheme produced values beyond the blow-up guard.
    #[error("grid scheme unstable: |u| reached {0:e}")]
    UnstableDetected(f64),

    /// Hopf-Lax evaluation requested for a non-convex Hamiltonian.
    #[error("Hamiltonian is not convex on the sampled range: {0}")]
    NotConvex(String),

    /// Closed-form evaluation outside its domain of validity.
    #[error("point outside the domain of validity: {0}")]
    DomainViolation(String),

    /// Scenario parameters leave no entropy-violation interval.
    #[error("empty violation interval: {0}")]
    EmptyViolationInterval(String),

    /// The two-unknown shock system did not converge.
    #[error("shock solve failed: {0}")]
    ShockSolverFailed(String),

    /// Wave normalization of a Hamiltonian failed its post-checks.
    #[error("wave normalization failed: {0}")]
    NormalizationFailed(String),

    /// The measured witness gap is not strictly positive.
    #[error("witness gap is not positive: {0}")]
    WitnessGapNonpositive(f64),

    /// Two grids that must share axes do not.
    #[error("grid axis mismatch: {0}")]
    AxisMismatch(String),

    /// Filesystem or serialization failure while emitting artifacts.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a spec or report file.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed CSV row in an artifact file.
    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, HjError>;
