use std::path::PathBuf;

use thiserror::Error;

use crate::tu::TuError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {msg}", path.as_ref().map_or("config".into(), |p| p.display().to_string()))]
    Config { path: Option<PathBuf>, msg: String },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Tu(#[from] TuError),
    #[error("{}:{line}: {msg}", path.display())]
    Checkpoint { path: PathBuf, line: usize, msg: String },
    #[error("dataset {name}: {msg}")]
    Data { name: String, msg: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        source: denoise_core::Error,
    },
    #[error("writing {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

impl CliError {
    pub fn core(context: impl Into<String>) -> impl FnOnce(denoise_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    /// 2 for configuration, 3 for data and IO, 4 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::EmptyGrid => 2,
            CliError::Core { source, .. } if source.is_numeric() => 4,
            CliError::Core {
                source: denoise_core::Error::InvalidConfig(_),
                ..
            } => 2,
            _ => 3,
        }
    }
}
