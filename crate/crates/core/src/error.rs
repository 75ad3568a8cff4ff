use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Scenario field violates a constraint. `path` is a JSON path such as `servers[2].cpu_capacity`.
    #[error("invalid scenario at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("topology error: {0}")]
    Topology(String),

    /// A scheduler answered with a server index that does not exist.
    #[error("scheduler `{policy}` chose server {index} but only {server_count} servers exist")]
    Protocol {
        policy: String,
        index: usize,
        server_count: usize,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("unknown policy `{0}` (expected one of worst_fit, mab_ucb, dqn, dqn_gnn, actor_critic)")]
    UnknownPolicy(String),

    #[error("malformed parameter record: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
