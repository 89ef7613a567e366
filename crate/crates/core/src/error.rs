use thiserror::Error;

pub type Result<T> = std::result::Result<T, SnlsError>;

#[derive(Debug, Error)]
pub enum SnlsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("search space too large: {count} combinations exceed budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("blowup at t = {time}: max |c_k| = {max_mode} exceeds {bound}")]
    Blowup { time: f64, max_mode: f64, bound: f64 },

    #[error("point leaves the domain: {0}")]
    DomainExit(String),

    #[error("transversality lost: |d/dt F_y| = {0:e}")]
    Transversality(f64),

    #[error("section self-consistency violated: residual {0:e}")]
    SelfConsistency(f64),

    #[error("genericity violated: {0}")]
    Degenerate(String),

    #[error("newton iteration failed: {0}")]
    Newton(String),

    #[error("slice construction failed: {0}")]
    Slices(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
