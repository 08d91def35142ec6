use std::path::{Path, PathBuf};

use fractoseg_core::weights::WeightsError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Command failures, grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },

    #[error("{0}")]
    Input(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } | CliError::Input(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn data(path: impl AsRef<Path>, message: impl std::fmt::Display) -> Self {
        CliError::Data {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.as_ref().to_path_buf();
        move |source| CliError::Io { path, source }
    }
}

impl From<fractoseg_core::Error> for CliError {
    fn from(e: fractoseg_core::Error) -> Self {
        use fractoseg_core::Error as E;
        match e {
            E::Diverged { .. } | E::NonFinite(_) => CliError::Numeric(e.to_string()),
            E::Config(m) => CliError::Config(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Attaches a file path to a core error.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> WithPath<T> for std::result::Result<T, fractoseg_core::Error> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| match CliError::from(e) {
            CliError::Input(m) => CliError::data(path, m),
            other => other,
        })
    }
}

impl<T> WithPath<T> for std::result::Result<T, WeightsError> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| CliError::data(path, e))
    }
}
