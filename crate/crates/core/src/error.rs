use thiserror::Error;

/// Errors shared across the workbench.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("sort error{}: {msg}", fmt_path(path))]
    Sort { msg: String, path: Vec<String> },

    #[error("cyclic substitution: {msg}")]
    Cycle { msg: String },

    #[error("rewrite step budget of {budget} exceeded")]
    StepLimitExceeded { budget: u64 },

    #[error("test variables outside frame domain: {msg}")]
    Domain { msg: String },

    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("precondition violated: {msg}")]
    Precondition { msg: String },

    #[error("bound exceeded: {what}")]
    BoundExceeded { what: String },

    #[error("model error: {msg}")]
    Model { msg: String },
}

fn fmt_path(path: &[String]) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!(" at {}", path.join("."))
    }
}

impl Error {
    pub fn sort(msg: impl Into<String>) -> Self {
        Error::Sort { msg: msg.into(), path: Vec::new() }
    }

    pub fn sort_at(msg: impl Into<String>, path: Vec<String>) -> Self {
        Error::Sort { msg: msg.into(), path }
    }

    pub fn cycle(msg: impl Into<String>) -> Self {
        Error::Cycle { msg: msg.into() }
    }

    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model { msg: msg.into() }
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition { msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
