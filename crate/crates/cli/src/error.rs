use std::path::PathBuf;

/// Failure modes of the harness, split by exit code: configuration and i/o
/// problems exit with 2, numeric failures inside the library with 3, and
/// checks that ran but missed their targets with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Numeric(#[from] linsysid::Error),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },

    #[error("reports differ in {0} field(s)")]
    ReportsDiffer(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Write { .. } => 2,
            CliError::Numeric(_) => 3,
            CliError::ChecksFailed { .. } | CliError::ReportsDiffer(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
