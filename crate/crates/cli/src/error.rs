use std::fmt;

use gbn::GbnError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Model(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Model(_) => 4,
        }
    }

    /// A data-side library error, except modality mismatches (configuration).
    pub fn data(e: GbnError) -> Self {
        match e {
            GbnError::Modality(m) => CliError::Config(format!("modality mismatch: {m}")),
            other => CliError::Data(other.to_string()),
        }
    }

    pub fn model(e: GbnError) -> Self {
        match e {
            GbnError::Modality(m) => CliError::Config(format!("modality mismatch: {m}")),
            other => CliError::Model(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Model(m) => write!(f, "model error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
