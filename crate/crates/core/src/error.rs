use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("aliasing: {samples} samples cannot resolve modes up to |m| = {n_max} (need at least {needed})")]
    Aliasing {
        samples: usize,
        n_max: usize,
        needed: usize,
    },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("function `{name}` expects {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("evaluation error at t = {t}, x = {x:?}: {message}")]
    Evaluation {
        t: f64,
        x: Vec<f64>,
        message: String,
    },

    #[error("non-finite gradient during flow after {steps} steps (merit {merit})")]
    NonFinite {
        steps: usize,
        merit: f64,
        /// Loop record of the last finite state, as JSON.
        state: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
