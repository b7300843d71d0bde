use std::path::PathBuf;

/// Everything that can stop a run or reject an input.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Total-Lagrangian breakdown: the deformation gradient turned over.
    #[error(
        "negative Jacobian at particle {particle} (x = {x:.6}, y = {y:.6}), epoch {epoch}, t = {time:.6} s, J = {jacobian:e}"
    )]
    NegativeJacobian {
        particle: usize,
        x: f64,
        y: f64,
        epoch: usize,
        time: f64,
        jacobian: f64,
    },

    #[error("non-finite {field} at particle {particle}, t = {time:.6} s")]
    NonFinite {
        field: &'static str,
        particle: usize,
        time: f64,
    },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for the total-Lagrangian failure mode.
    pub fn is_negative_jacobian(&self) -> bool {
        matches!(self, Error::NegativeJacobian { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
