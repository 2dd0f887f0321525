use std::path::{Path, PathBuf};

/// Failure categories, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input data.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// The simulation itself failed.
    #[error("runtime error: {0}")]
    Runtime(String),
    /// `selfcheck` found failing checks.
    #[error("{0} self-check(s) failed")]
    Check(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn from_core(e: mmw_snr::Error) -> Self {
        use mmw_snr::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Parse { .. } | E::Format { .. } => {
                CliError::Config(e.to_string())
            }
            E::Io(source) => CliError::Io {
                path: PathBuf::from("<input>"),
                source,
            },
            other => CliError::Runtime(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Runtime(_) => 4,
            CliError::Check(_) => 5,
        }
    }
}
