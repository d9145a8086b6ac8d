use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] z2dfl_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    /// A value that would be written out is NaN or infinite.
    #[error("non-finite value in {file}, row {row}")]
    NonFinite { file: String, row: usize },
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError::Config(msg.into())
    }

    /// Core errors raised while interpreting settings are configuration errors.
    pub fn config_from(e: z2dfl_core::Error) -> Self {
        RunError::Config(e.to_string())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        RunError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 1 for configuration problems, 2 for numerical failures, 3 for file-system errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) | RunError::NonFinite { .. } => 2,
            RunError::Io { .. } => 3,
        }
    }
}
