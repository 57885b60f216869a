use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("link index {index} outside 1..={dof}")]
    LinkIndex { index: usize, dof: usize },
    #[error("J*J^T is numerically singular (smallest singular value {sigma_min:e})")]
    Singular { sigma_min: f64 },
    #[error("Euler-rate map is singular at pitch {pitch} rad")]
    GimbalLock { pitch: f64 },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid model: {0}")]
    Invalid(String),
}
