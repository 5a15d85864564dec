use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("potential is singular at the origin for s = {s}")]
    Singular { s: f64 },
    #[error("accuracy target not met: {0}")]
    Accuracy(String),
    #[error("unsupported case: {0}")]
    Unsupported(String),
    #[error("degenerate schedule: {0}")]
    DegenerateSchedule(String),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("consistency failure: {0}")]
    Consistency(String),
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Accuracy(_) | Error::Resolution(_) | Error::Consistency(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
