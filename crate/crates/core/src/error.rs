use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbnError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A positive count (or observation) sits on a cell whose total rate is zero.
    #[error("zero rate at positive count (layer {layer}, row {row}, doc {doc})")]
    DegenerateRate { layer: usize, row: usize, doc: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported model file version {found:?} (expected {expected})")]
    ModelVersion { found: String, expected: &'static str },

    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Observations do not match the link function.
    #[error("modality mismatch: {0}")]
    Modality(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GbnError> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> GbnError {
    GbnError::Parameter {
        name,
        value,
        reason,
    }
}
