use thiserror::Error;

/// Errors raised by the simulation kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown level scheme `{0}`")]
    UnknownScheme(String),

    #[error("invalid level scheme `{scheme}`: {reason}")]
    InvalidScheme { scheme: String, reason: String },

    #[error("unsupported field configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("steady state is numerically degenerate (condition estimate {condition:.3e})")]
    NumericalDegeneracy { condition: f64 },

    #[error("step size underflow at t = {time:.6e} s (h = {step:.3e} s); the problem is stiff, try a tighter tolerance or shorter horizon")]
    Stiffness { time: f64, step: f64 },

    #[error("quadrature did not converge: node doubling changed the result by {change:.3e} (tolerance {tolerance:.3e})")]
    Accuracy { change: f64, tolerance: f64 },

    #[error("phase matching infeasible: {0}")]
    Infeasible(String),

    #[error("propagation aborted at z = {z:.6e} m: {source}")]
    Propagation {
        z: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::UnknownScheme(_) => "unknown-scheme",
            Error::InvalidScheme { .. } => "invalid-scheme",
            Error::UnsupportedConfiguration(_) => "unsupported-configuration",
            Error::NumericalDegeneracy { .. } => "numerical-degeneracy",
            Error::Stiffness { .. } => "stiffness",
            Error::Accuracy { .. } => "accuracy",
            Error::Infeasible(_) => "infeasible",
            Error::Propagation { .. } => "propagation",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Whether the error stems from bad input or physics limits rather than
    /// an internal failure.
    pub fn is_domain(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
