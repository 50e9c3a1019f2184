use thiserror::Error;

/// Errors raised by grid construction, the wave solver, the interface
/// operations and the flow driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("field contains a non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("CFL violation: dt = {dt:e} exceeds the stable bound {max_dt:e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("wave solver produced a non-finite value at substep {substep}")]
    Blowup { substep: usize },

    #[error("interface is empty")]
    EmptyInterface,

    #[error("length mismatch: expected at least {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that arise while integrating (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Blowup { .. } | Error::NonFinite { .. } | Error::EmptyInterface
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
