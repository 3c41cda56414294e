use std::fmt;

/// Command failure with its process exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Invalid arguments; exit 2.
    Usage(String),
    /// Unreadable or malformed input file; exit 2.
    Input(String),
    /// A computation failed or an invariant did not hold; exit 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Input(_) => 2,
            Self::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qsample_core::Error> for CliError {
    fn from(e: qsample_core::Error) -> Self {
        match e {
            qsample_core::Error::Parse { .. } | qsample_core::Error::Io(_) => Self::Input(e.to_string()),
            _ => Self::Failure(e.to_string()),
        }
    }
}
