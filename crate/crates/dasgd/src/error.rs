use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dasgd_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| Self::Csv { path, source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Self::Format { path: path.into(), msg: msg.into() }
    }

    /// 2 for anything the user can fix in the configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Json { .. } => 2,
            Self::Core(e) if is_config_error(e) => 2,
            _ => 1,
        }
    }
}

fn is_config_error(e: &dasgd_core::Error) -> bool {
    use dasgd_core::Error::*;
    matches!(e, InvalidConfig(_) | InvalidConfidence(_) | InvalidSupport(_) | InvalidCovariance)
}

pub type Result<T> = std::result::Result<T, CliError>;
