//! Library surface of the experiment harness: configuration, presets and the
//! command implementations, shared by the `jump` binary and the integration
//! tests.

pub mod config;
pub mod presets;
pub mod runner;

use thiserror::Error;

/// Harness errors, classed for distinct process exit codes.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or mismatched artifacts. Exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Missing or malformed data, files or checkpoints. Exit code 3.
    #[error("data error: {0}")]
    Data(String),

    /// Divergence or non-finite arithmetic. Exit code 4.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The identity suite reported a failure. Exit code 5.
    #[error("identity checks failed\n{0}")]
    CheckFailed(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Numeric(_) => 4,
            HarnessError::CheckFailed(_) => 5,
        }
    }
}

impl From<jump::Error> for HarnessError {
    fn from(err: jump::Error) -> Self {
        use jump::Error as E;
        match err {
            E::InvalidParameter(m) | E::Calibration(m) => HarnessError::Config(m),
            E::Numeric(m) | E::Timestep(m) => HarnessError::Numeric(m),
            E::Shape(m) | E::Domain(m) | E::Checkpoint(m) => HarnessError::Data(m),
            E::Parse { line, msg } => HarnessError::Data(format!("line {line}: {msg}")),
            E::Ingest { path, msg } => HarnessError::Data(format!("{path}: {msg}")),
            E::Io(e) => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(err: std::io::Error) -> Self {
        HarnessError::Data(err.to_string())
    }
}
