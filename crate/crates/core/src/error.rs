use thiserror::Error;

/// Coarse failure category, mapped onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Numerical => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("covariance of class {class} is not positive semidefinite (eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPositiveSemidefinite {
        class: usize,
        min_eigenvalue: f64,
        tolerance: f64,
    },

    #[error("unknown activation {0:?} (expected one of linear, relu, abs, lrelu:<s+>:<s->, indicator, sign, quad:<s2>:<s1>:<s0>, cos, sin, erf, gauss-exp)")]
    UnknownActivation(String),

    #[error("fixed point did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_)
            | Error::UnknownActivation(_)
            | Error::Config(_)
            | Error::DimensionMismatch(_) => ErrorCategory::Usage,
            Error::Empty(_) | Error::Format { .. } | Error::Parse { .. } | Error::Io(_) => {
                ErrorCategory::Data
            }
            Error::NonFinite(_)
            | Error::NotPositiveSemidefinite { .. }
            | Error::NoConvergence { .. }
            | Error::Numerical(_) => ErrorCategory::Numerical,
            Error::Context { source, .. } => source.category(),
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(context()))
    }
}
