use alloc::string::String;

/// Errors raised anywhere in the control pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    Numeric(String),
    #[error("simulation diverged: {0}")]
    Divergence(String),
    #[error("calibration window is empty")]
    EmptyCalibration,
    #[error("action index {index} out of range for {actions} actions")]
    Action { index: usize, actions: usize },
    #[error("efficiency is undefined when no input work has been done")]
    UndefinedEfficiency,
    #[error("gradient shape mismatch: {0}")]
    Gradient(String),
    #[error("training diverged in epoch {epoch} at sample {sample}: loss={loss}")]
    TrainingDivergence { epoch: usize, sample: usize, loss: f64 },
    #[error("metrics: {0}")]
    Metrics(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
