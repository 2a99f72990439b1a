use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("[{module}] sizing error: {msg}")]
    Sizing { module: &'static str, msg: String },
    #[error("unsupported operator: {0}")]
    Unsupported(String),
    #[error("rank-deficient constraints: {0}")]
    RankDeficient(String),
    #[error("misuse: {0}")]
    Misuse(String),
    #[error("length mismatch: {0}")]
    Mismatch(String),
    #[error("instability detected: {0}")]
    Unstable(String),
    #[error("power iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn sizing(module: &'static str, msg: impl Into<String>) -> Error {
    Error::Sizing {
        module,
        msg: msg.into(),
    }
}
