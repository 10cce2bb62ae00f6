use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("under-determined: {points} points for {params} parameters")]
    UnderDetermined { points: usize, params: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parameters are not canonical (eps2 = {eps2} > 1); canonicalize first")]
    NotCanonical { eps2: f64 },

    #[error("point behind camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for failures that stem from the numbers rather than from the
    /// caller's arguments or file contents.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnderDetermined { .. } | Error::Degenerate(_) | Error::BehindCamera { .. }
        )
    }
}
