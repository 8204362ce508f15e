use std::fmt;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A position in source text, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },

    #[error("`{name}` expects {expected} argument(s), found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid model:{}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("{0}")]
    Parse(Diagnostic),

    #[error("{what} ({size}) exceeds the configured limit ({limit})")]
    Limit {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("evidence has probability zero")]
    InconsistentEvidence,

    #[error("invalid query: {0}")]
    Query(String),

    #[error("`{0}` is not the child of any factor; cannot intervene on it")]
    NoParentFactor(String),

    #[error("intervention target `{target}` is not isolated in parfactor `{parfactor}`")]
    NotIsolated { target: String, parfactor: String },

    #[error("cannot convert to a Bayesian network: {0}")]
    NotBayesNet(String),

    #[error("operator precondition violated: {0}")]
    Precondition(String),

    #[error("benchmark output: {0}")]
    Bench(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| format!("\n  {v}")).collect()
}

impl Error {
    pub(crate) fn query(msg: impl Into<String>) -> Self {
        Error::Query(msg.into())
    }

    pub fn is_limit(&self) -> bool {
        matches!(self, Error::Limit { .. })
    }
}
