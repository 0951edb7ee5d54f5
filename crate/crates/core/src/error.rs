use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants split into input problems (bad files, bad flags) and computation
/// problems (degenerate statistics, quadrature failures); see [`Error::is_input`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("user {user} has conflicting partisanship values {first} and {second}")]
    ConflictingSurvey { user: String, first: u8, second: u8 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty audience profile")]
    EmptyProfile,

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("NSB quadrature did not converge (residual {residual:.3e})")]
    NsbNonConvergence { residual: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    /// True for errors caused by bad inputs or configuration rather than
    /// by the numerics.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::ConflictingSurvey { .. }
                | Error::InvalidInput(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }

    /// Short machine-readable error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::ConflictingSurvey { .. } => "conflicting_survey",
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyProfile => "empty_profile",
            Error::Degenerate(_) => "degenerate",
            Error::NsbNonConvergence { .. } => "nsb_non_convergence",
            Error::RankDeficient => "rank_deficient",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
