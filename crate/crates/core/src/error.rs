use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A kernel was evaluated at (or an image of) its singular point.
    #[error("kernel singularity at {x:?} / {y:?}")]
    Singular { x: [f64; 2], y: [f64; 2] },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("superlevel set above {threshold} is empty")]
    EmptySupport { threshold: f64 },

    #[error("multiplier solve failed after {iterations} iterations (mass residual {mass_residual:e}, momentum residual {momentum_residual:e})")]
    MultiplierFailure {
        iterations: usize,
        mass_residual: f64,
        momentum_residual: f64,
    },

    #[error("no convergence at lambda = {lambda:e} after {iterations} iterations (residual {residual:e})")]
    ContinuationFailure {
        lambda: f64,
        iterations: usize,
        residual: f64,
        /// (lambda, alpha, mu) for every level that did converge.
        trajectory: Vec<(f64, f64, f64)>,
    },

    #[error("vortices {0} and {1} collided")]
    Collision(usize, usize),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
}

impl Error {
    pub(crate) fn singular(x: crate::Point, y: crate::Point) -> Self {
        Error::Singular {
            x: [x.x, x.y],
            y: [y.x, y.y],
        }
    }
}
