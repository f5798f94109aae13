use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter outside domain: {0}")]
    Domain(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("solution blew up at t = {t}")]
    Blowup { t: f64 },

    #[error("time {t} outside trajectory range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("Lambert W branch {k} is undefined at z = {z}")]
    BranchDomain { k: i32, z: String },

    #[error("integration contour passes through a root")]
    ContourOnRoot,

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("point is not on a Hopf curve (residual {residual:e})")]
    NotOnHopfCurve { residual: f64 },

    #[error("ill-conditioned reduction: {0}")]
    IllConditioned(String),

    #[error("first Lyapunov coefficient does not change sign on the sampled curve")]
    NoSignChange,

    #[error("Poincare section is empty")]
    EmptySection,

    #[error("no large-amplitude cycle at the starting point")]
    NoCycleAtStart,

    #[error("fast system is not bistable at these parameters")]
    NotBistable,

    #[error("orbit did not converge: {0}")]
    NonConvergent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error comes from bad user input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidConfig(_)
                | Error::Domain(_)
                | Error::DegenerateParameters(_)
                | Error::OutOfRange { .. }
                | Error::BranchDomain { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
