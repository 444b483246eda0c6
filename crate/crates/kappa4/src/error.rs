use std::path::Path;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad data, flags or configuration.
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] kappa4_core::Error),
    /// Every requested method failed to converge.
    #[error("no method converged")]
    NoConvergence,
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NoConvergence
            | CliError::Core(kappa4_core::Error::NotConverged | kappa4_core::Error::LocalOptimum { .. }) => {
                EXIT_NO_CONVERGENCE
            }
            _ => EXIT_INPUT,
        }
    }
}
