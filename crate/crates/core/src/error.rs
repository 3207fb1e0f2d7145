use thiserror::Error;

#[derive(Debug, Error)]
pub enum CmaError {
    /// Input outside the domain of a formula or constructor.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// Factor table or model document is malformed.
    #[error("model construction error in {location}: {message}")]
    Construction { location: String, message: String },

    #[error("illegal action {action} in state {state}")]
    IllegalAction { state: String, action: String },

    #[error("value iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// Zero-probability observation under the current belief.
    #[error("inconsistent observation: {0}")]
    Inconsistent(String),

    #[error("empty belief set")]
    EmptyBeliefSet,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CmaError> = std::result::Result<T, E>;
