use crate::model::ViolationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    Validation(#[from] ViolationReport),

    #[error("no saddle points: pattern speed is zero, only the central equilibrium exists")]
    NoSaddlePoints,

    #[error("degenerate hyperbolicity: lambda^2 = {lambda_sq:e} <= 0, the equilibrium is not a saddle")]
    DegenerateHyperbolicity { lambda_sq: f64 },

    #[error("symplectic normalisation failed: {0}")]
    SignNormalization(String),

    #[error("eigenvalue cross-check failed: closed form {closed:e} vs eigensolver {numeric:e}")]
    EigenMismatch { closed: f64, numeric: f64 },

    #[error("zero divisor in homological equation for monomial {0:?}")]
    ZeroDivisor([u8; 6]),

    #[error("series frames differ: {0} vs {1}")]
    FrameMismatch(&'static str, &'static str),

    #[error("integration step underflow at t = {t}: required step {h:e}")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),

    #[error("energy {energy} is not above the equilibrium energy {h0}")]
    EnergyBelowEquilibrium { energy: f64, h0: f64 },

    #[error("differential correction did not converge after {iterations} iterations (residual {residual:e})")]
    CorrectionDivergence { iterations: usize, residual: f64 },

    #[error("root finding failed: {0}")]
    RootNotFound(String),

    #[error("incomplete section curve: {missing} of {total} trajectories never reached the surface")]
    IncompleteCurve { missing: usize, total: usize },

    #[error("curves are not comparable: {0}")]
    IncomparableCurves(String),

    #[error("connection refinement stalled with gap {gap:e}")]
    RefinementStall { gap: f64 },

    #[error("outer branch escaped before crossing y = 0")]
    NoCrossing,

    #[error("artifact problem: {0}")]
    Artifact(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::InvalidArgument(_) | Error::Parse(_) => 2,
            Error::Io(_) | Error::Json(_) | Error::Artifact(_) => 3,
            _ => 4,
        }
    }
}
