use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] mbeseg::Error),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("unsupported image {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("suite member `{member}` failed: {source}")]
    Suite {
        member: String,
        #[source]
        source: Box<CliError>,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Process exit code: 2 config, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Format { .. } => 2,
            CliError::Model(e) => match e {
                mbeseg::Error::Divergence { .. } | mbeseg::Error::NonpositiveAuxEnergy { .. } => 3,
                _ => 2,
            },
            CliError::Io { .. } => 4,
            CliError::Suite { source, .. } => source.exit_code(),
        }
    }
}
