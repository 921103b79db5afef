//! Command implementations and file formats behind the `itshap` binary.

pub mod commands;
pub mod format;

/// Exit-code bearing error: parse and usage problems exit 2, domain
/// violations 3, capacity guards 4, failed verification batteries 1.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Domain(String),
    Capacity(String),
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Capacity(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "parse error: {msg}"),
            CliError::Domain(msg) => write!(f, "domain violation: {msg}"),
            CliError::Capacity(msg) => write!(f, "capacity guard: {msg}"),
            CliError::VerifyFailed(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<itshap::Error> for CliError {
    fn from(err: itshap::Error) -> Self {
        match err {
            itshap::Error::Capacity(msg) => CliError::Capacity(msg),
            itshap::Error::InvalidInput(msg)
            | itshap::Error::Bounds(msg)
            | itshap::Error::Shape(msg) => CliError::Domain(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Parse(err.to_string())
    }
}
