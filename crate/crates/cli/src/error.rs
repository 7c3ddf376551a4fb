use std::io;
use std::path::{Path, PathBuf};

use sparsest_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A solve stopped at its iteration cap.
    pub const NOT_CONVERGED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const SOLVER: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },

    #[error("solver: {0}")]
    Solver(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } | CliError::Format { .. } => exit::IO,
            CliError::Solver(_) => exit::SOLVER,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        CliError::Format { path: path.to_path_buf(), line, msg: msg.into() }
    }
}

/// Parameter errors from the core are configuration problems; everything
/// else is a solver failure.
impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(msg) => CliError::Config(msg),
            CoreError::RequiresL1(_) | CoreError::NonSmoothLoss(_) | CoreError::NotTwiceDifferentiable(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Solver(other),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
