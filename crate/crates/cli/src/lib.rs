//! Stage commands and the review HTTP service behind the `groundsynth` binary.

pub mod commands;
pub mod serve;

/// Bad flag combinations or arguments detected after parsing; exits with 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// An evaluation that ran fine but scored under `--fail-under`; exits with 2.
#[derive(Debug, thiserror::Error)]
#[error("accuracy {accuracy:.4} is below the --fail-under threshold {threshold}")]
pub struct BelowThreshold {
    pub accuracy: f64,
    pub threshold: f64,
}
