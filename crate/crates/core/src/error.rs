use serde::Serialize;

/// Failures raised by the estimators.
///
/// Every variant names the module and operation that produced it so the CLI
/// can emit a structured error record without extra bookkeeping.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{module}::{operation}: invalid argument: {message}")]
    Argument {
        module: &'static str,
        operation: &'static str,
        message: String,
    },
    #[error("{module}::{operation}: numerical failure{}: {message}", index_suffix(.index))]
    Numerical {
        module: &'static str,
        operation: &'static str,
        message: String,
        /// Orbit step or sample index where the failure surfaced.
        index: Option<usize>,
    },
    #[error("{module}::{operation}: did not converge: {message}")]
    Convergence {
        module: &'static str,
        operation: &'static str,
        message: String,
    },
}

fn index_suffix(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" at index {i}"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn argument(
        module: &'static str,
        operation: &'static str,
        message: impl Into<String>,
    ) -> Self {
        Error::Argument {
            module,
            operation,
            message: message.into(),
        }
    }

    pub fn numerical(
        module: &'static str,
        operation: &'static str,
        message: impl Into<String>,
        index: Option<usize>,
    ) -> Self {
        Error::Numerical {
            module,
            operation,
            message: message.into(),
            index,
        }
    }

    pub fn convergence(
        module: &'static str,
        operation: &'static str,
        message: impl Into<String>,
    ) -> Self {
        Error::Convergence {
            module,
            operation,
            message: message.into(),
        }
    }

    /// Replaces the index carried by a numerical error, e.g. to report the
    /// sample that failed rather than the orbit step.
    pub fn with_index(self, idx: usize) -> Self {
        match self {
            Error::Numerical {
                module,
                operation,
                message,
                index,
            } => Error::Numerical {
                module,
                operation,
                message: match index {
                    Some(step) => format!("{message} (step {step})"),
                    None => message,
                },
                index: Some(idx),
            },
            other => other,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument { .. } => "argument",
            Error::Numerical { .. } => "numerical",
            Error::Convergence { .. } => "convergence",
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            Error::Argument { module, .. }
            | Error::Numerical { module, .. }
            | Error::Convergence { module, .. } => module,
        }
    }

    pub fn operation(&self) -> &'static str {
        match self {
            Error::Argument { operation, .. }
            | Error::Numerical { operation, .. }
            | Error::Convergence { operation, .. } => operation,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            kind: self.kind(),
            module: self.module(),
            operation: self.operation(),
            message: self.to_string(),
            index: match self {
                Error::Numerical { index, .. } => *index,
                _ => None,
            },
        }
    }
}

/// Serializable view of an [`Error`].
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub module: &'static str,
    pub operation: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}
