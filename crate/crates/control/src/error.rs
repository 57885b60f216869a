use armctl_kinematics::KinematicsError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
