use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular point: radius {radius:e} below the admissible minimum {r_min:e}")]
    SingularPoint { radius: f64, r_min: f64 },
    #[error("t = {t} lies outside the validity interval [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("point lies outside the coordinate chart: {0}")]
    OutOfChart(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("unsupported time coefficient: {0}")]
    UnsupportedOmega(String),
    #[error("case inapplicable: {0}")]
    CaseInapplicable(String),
    #[error("ODE integration failed: {0}")]
    OdeSolveFailure(String),
    #[error("integration step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("trajectory reached a singularity at t = {t}")]
    SingularityReached { t: f64 },
    #[error("quadrature failed on [{a}, {b}]: estimated error {error:e}")]
    QuadratureFailure { a: f64, b: f64, error: f64 },
    #[error("time map is not invertible: {0}")]
    NonInvertible(String),
    #[error("time coefficient is non-positive at s = {s}")]
    NegativeOmega { s: f64 },
    #[error("symmetry flow left the admissible domain at parameter {eps}")]
    FlowEscape { eps: f64 },
    #[error("invalid collineation '{name}': residual {residual:e} exceeds {tolerance:e}")]
    InvalidCollineation { name: String, residual: f64, tolerance: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
