use thiserror::Error;

/// Failures of the experiment runner, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("phase `{phase}` failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: qae_ids_core::Error,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Phase { .. } | CliError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Tags a core error with the pipeline phase it came from.
pub(crate) trait PhaseContext<T> {
    fn phase(self, phase: &'static str) -> Result<T>;
}

impl<T> PhaseContext<T> for qae_ids_core::Result<T> {
    fn phase(self, phase: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Phase { phase, source })
    }
}
