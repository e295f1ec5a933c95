use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; the message names the offending field.
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("numerical instability: norm drift {drift:.3e} exceeds 1e-8 with dt = {dt}; use a smaller time step")]
    Instability { drift: f64, dt: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("resource bound exceeded: {0}")]
    ResourceBound(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Domain(_) | Error::Geometry(_) | Error::UnknownGate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
