use thiserror::Error;

/// Failures raised by individual filter operations.
///
/// The step functions never surface these to the caller; they skip the
/// failing component update and count it in [`crate::Diagnostics`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("measurement set is empty")]
    EmptyMeasurementSet,
    #[error("innovation covariance is singular (condition number {0:.3e})")]
    SingularInnovation(f64),
    #[error("pseudo-measurement covariance is singular (condition number {0:.3e})")]
    SingularPseudoCov(f64),
    #[error("orientation prior variance is zero, information form is undefined")]
    DegenerateInformation,
    #[error("matrix is not positive semi-definite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),
}

/// Invalid scenario or filter configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

impl ConfigError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ConfigError::Invalid(msg.into())
    }
}

/// A malformed line in a JSON Lines input; `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}
