use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A CSV cell could not be read as the expected value.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    /// The requested stratification cannot be honoured by the data.
    #[error("infeasible stratification: {0}")]
    Infeasible(String),

    /// A metric's denominator was zero or a required class was missing.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Feature selection ran out of distinct violation-score tiers.
    #[error("violation-score tiers exhausted at tier {tier} ({distinct} distinct scores)")]
    TierExhausted { tier: usize, distinct: usize },

    /// No tier of selected features leaves a two-class survivor set.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Every grid configuration failed to fit or score.
    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name, used by the CLI when reporting failures.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::Parse { .. } | Error::Schema(_) | Error::Csv(_) | Error::Json(_) => "input",
            Error::Infeasible(_) => "infeasible",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::TierExhausted { .. } | Error::Degenerate(_) => "degenerate",
            Error::Tuning(_) => "tuning",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code for the CLI. Zero is reserved for success and two for
    /// argument errors reported by the parser itself.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "input" => 3,
            "contract" => 4,
            "infeasible" => 5,
            "undefined-metric" | "degenerate" | "tuning" => 6,
            "io" => 7,
            _ => 1,
        }
    }
}
