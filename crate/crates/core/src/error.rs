use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular covariance (condition number {condition:.3e})")]
    SingularCovariance { condition: f64 },

    #[error("singular covariance at iteration {iteration}: {source}")]
    SingularAtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular covariance for center {center}: {source}")]
    SingularAtCenter {
        center: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("component {0} covariance is not a multiple of the identity")]
    NonSphericalComponent(usize),

    #[error("data have zero range")]
    ZeroRange,

    #[error("mixture density is zero (component {0} has zero proportion)")]
    ZeroDensity(usize),

    #[error("cluster count {k} is degenerate for n = {n}")]
    DegenerateK { k: usize, n: usize },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("no restart converged to a fixed point")]
    NoCenters,

    #[error("every gamma value failed; last error: {0}")]
    AllGammaFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularCovariance { .. }
            | Error::SingularAtIteration { .. }
            | Error::SingularAtCenter { .. }
            | Error::ZeroDensity(_)
            | Error::NoCenters
            | Error::AllGammaFailed(_) => true,
            _ => false,
        }
    }
}
