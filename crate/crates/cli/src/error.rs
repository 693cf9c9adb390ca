use vsense_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("dependency error: {0}")]
    Dependency(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Dependency(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Core(e) => match e {
                Error::Parameter { .. } => 2,
                Error::Sequencing(_) | Error::Incompatible { .. } => 3,
                Error::Invariant(_) | Error::Labeling(_) | Error::NonFinite { .. } | Error::Dimension { .. } => 4,
                Error::Aggregation(_) => 2,
                Error::Format { .. } | Error::Io { .. } => 1,
            },
        }
    }
}
