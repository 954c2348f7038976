use ptpb_control::ControlError;
use thiserror::Error;

/// Errors raised by models, the feasibility calculus and the simulator.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Control(#[from] ControlError),

    /// The mass-matrix solve failed; the model is broken, not the controller.
    #[error("singular mass matrix at q = {q:?}")]
    SingularMass { q: Vec<f64> },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sigma = {sigma} outside [{lower}, {upper})")]
    InvalidSigma { sigma: f64, lower: f64, upper: f64 },

    #[error("empty region")]
    EmptyRegion,

    #[error("no samples at or after t0 + T = {settle}")]
    InsufficientWindow { settle: f64 },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
