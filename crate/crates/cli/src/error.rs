use std::fmt;
use std::path::Path;

/// Failures mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable / malformed input; exit 2.
    Input(String),
    /// Training diverged or a report failed its checks; exit 3.
    Numeric(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with the file it came from.
    pub fn at(path: &Path, e: impl Into<adarc_core::Error>) -> Self {
        match CliError::from(e.into()) {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            numeric => numeric,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<adarc_core::Error> for CliError {
    fn from(e: adarc_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                adarc_core::Error::from(e).into()
            }
        }
    )*};
}

via_core!(
    adarc_core::ingest::IngestError,
    adarc_core::signals::SignalError,
    adarc_core::features::FeatureError,
    adarc_core::seqmodel::ModelError,
    adarc_core::trainer::TrainError,
    adarc_core::eval::EvalError
);
