use thiserror::Error;

/// Errors raised by the control-law building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid constraint box: {0}")]
    InvalidBox(String),

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    /// The filtered error reached the barrier radius; K(t) would be infinite.
    #[error("barrier breach: |chi| = {chi_norm} >= varpi = {varpi}")]
    BarrierBreach { chi_norm: f64, varpi: f64 },

    /// The band shrunk by the safety margin is empty for joint `index`.
    #[error(
        "infeasible safety margin at joint {index}: phi0+ - c = {upper} < phi0- + c = {lower}"
    )]
    InfeasibleMargin {
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("singular Lambda: |Upsilon[{index}]| = {value} below floor")]
    SingularUpsilon { index: usize, value: f64 },
}

pub type Result<T, E = ControlError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(ControlError::DimensionMismatch { expected, found })
    }
}
