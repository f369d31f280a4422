use std::fmt;
use std::path::PathBuf;

use crate::scorer::ScorerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One problem found while validating a corpus file.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    /// 1-based line number in the source file.
    pub line: usize,
    pub id: Option<String>,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {}: record {}: {}", self.line, id, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{} validation error(s):\n{}", .0.len(), render_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("question needs {needed} tokens but max_len is {max_len}")]
    QuestionTooLong { needed: usize, max_len: usize },

    #[error("post {0} has no auxiliary question")]
    MissingAuxQuestion(String),

    #[error("degenerate sample variance (all samples equal)")]
    DegenerateVariance,

    #[error("missing predictions for {} id(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

fn render_issues(issues: &[ValidationIssue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
