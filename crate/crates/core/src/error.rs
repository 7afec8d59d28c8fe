use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("quadrature did not converge: relative change {relative_change:e} after refinement")]
    Quadrature { relative_change: f64 },

    #[error("state evolution did not converge after {iterations} iterations (last iterate {last})")]
    StateEvolution { iterations: usize, last: f64 },

    #[error("decoder diverged at iteration {iteration}: predicted mse {mse:e} exceeds 10x signal energy {energy:e}")]
    Divergence { iteration: usize, mse: f64, energy: f64 },

    #[error("instance too large for exhaustive search: {0} candidate allocations")]
    TooLarge(u64),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Dimension(_)
                | Error::Format(_)
                | Error::TooLarge(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
