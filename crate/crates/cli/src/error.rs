use thermoctl_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn parse(line: usize, message: String) -> Self {
        CliError::Parse { line, message }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 2 for bad input (including infeasible or out-of-domain problems),
    /// 1 for numerical or I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Domain(_)
                | CoreError::InfeasibleDuration { .. }
                | CoreError::MissingBoundary(_)
                | CoreError::InvalidProtocol(_) => 2,
                _ => 1,
            },
            CliError::Io { .. } => 1,
        }
    }
}
