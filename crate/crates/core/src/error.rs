use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("amplitude at site {site} would leave the open lattice at step {step}")]
    OpenEdge { site: i64, step: usize },

    #[error("eigenvalue iteration did not converge at index {index}")]
    NonConvergence { index: usize },

    #[error("eigenpair {index} violates the residual bound: {residual:e} > {bound:e}")]
    Residual { index: usize, residual: f64, bound: f64 },

    #[error("numerical domain error: {0}")]
    Domain(String),

    #[error("band tracking: {0}")]
    UntrackedBand(String),

    #[error("reference energy lies within {distance:e} of the spectral curve")]
    TooCloseToCurve { distance: f64 },

    #[error("sigma_z/sigma_x reconstruction cannot recover Im chi for complex amplitudes")]
    UnsupportedReconstruction,

    #[error("no detections recorded")]
    NoDetections,
}

impl Error {
    pub(crate) fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }
}
