use std::path::PathBuf;

/// Errors raised by the allocation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error in {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("could not bracket a root of {what} after {expansions} expansions")]
    NoBracket { what: &'static str, expansions: u32 },

    /// The requested allocation problem has no solution (for example a
    /// diverging ping-pong iteration or an empty feasible grid).
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for configuration and input-format errors, as opposed to
    /// numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json(_) | Error::Io { .. })
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
