use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    /// The configuration is malformed or inconsistent (exit code 2).
    #[error("invalid config: {0}")]
    Config(String),
    /// The simulation itself failed, e.g. a start outside the domain (exit code 1).
    #[error("runtime failure: {0}")]
    Runtime(#[from] reflow_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}
