use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum Error {
    Io { path: PathBuf, source: std::io::Error },
    Toml { path: PathBuf, source: toml::de::Error },
    Csv(csv::Error),
    Solver(thermoporous::Error),
    /// Inconsistent or unsupported case settings.
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Toml { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Csv(e) => write!(f, "metrics: {e}"),
            Error::Solver(e) => write!(f, "{e}"),
            Error::Config(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Toml { source, .. } => Some(source),
            Error::Csv(e) => Some(e),
            Error::Solver(e) => Some(e),
            Error::Config(_) => None,
        }
    }
}

impl From<thermoporous::Error> for Error {
    fn from(e: thermoporous::Error) -> Self {
        Error::Solver(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
