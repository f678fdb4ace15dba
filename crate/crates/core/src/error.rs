use std::fmt;
use std::path::PathBuf;

/// A single violated configuration rule, addressed by its key path in the
/// JSON configuration (for example `grid.h`).
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl Violation {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("profile ODE did not converge: {0}")]
    ProfileNonConvergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("blow-up at step {step} (t = {time:.6e}): max|u| = {max_abs:.3e}")]
    BlowUp { step: usize, time: f64, max_abs: f64 },

    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("nonpositive quantity {value} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("sweep member epsilon = {epsilon}: {source}")]
    Member {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
