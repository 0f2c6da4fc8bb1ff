use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid state: {0}")]
    State(String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error(
        "training diverged at epoch {epoch}, minibatch {minibatch}: \
         L_comm={loss_comm}, L_detect={loss_detect}, L_angle={loss_angle}"
    )]
    Diverged {
        epoch: usize,
        minibatch: usize,
        loss_comm: f64,
        loss_detect: f64,
        loss_angle: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Error {
    Error::ShapeMismatch {
        expected: expected.into(),
        got: got.into(),
    }
}
