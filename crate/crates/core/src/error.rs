use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// One entry per violated constraint, so a bad config file is reported in one pass.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical blow-up at step {step} (t = {t}){}", match .checkpoint {
        Some(p) => format!("; last checkpoint: {}", p.display()),
        None => String::new(),
    })]
    BlowUp {
        step: u64,
        t: f64,
        checkpoint: Option<PathBuf>,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("degenerate modulus at y = {y}: phase is undefined")]
    DegenerateModulus { y: f64 },

    #[error("observer failed at step {step}: {source}")]
    Observer { step: u64, source: Box<Error> },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("analysis input: {0}")]
    Input(String),

    #[error("internal: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    /// Process exit status for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::BlowUp { .. } => 3,
            Error::Observer { source, .. } => source.exit_code(),
            Error::Input(_) | Error::DegenerateModulus { .. } => 4,
            _ => 1,
        }
    }
}
