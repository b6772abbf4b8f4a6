use std::path::PathBuf;

/// Errors raised by the IDSP pipeline.
///
/// Each variant maps onto one process exit code (see [`Error::exit_code`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate bandwidth: {0}")]
    DegenerateBandwidth(String),

    #[error("numerical error: system of order {order} with lambda = {lambda} is singular to machine precision")]
    Singular { order: usize, lambda: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// 0 success, 1 input error, 2 numerical error, 3 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Parse { .. }
            | Error::Parameter(_)
            | Error::DegenerateBandwidth(_)
            | Error::Io { .. } => 1,
            Error::Singular { .. } | Error::Numerical(_) => 2,
            Error::Invariant(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
