use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("executor {0} died while others waited at a rendezvous")]
    ExecutorDied(usize),
    #[error("executor {executor} panicked: {message}")]
    ExecutorPanic { executor: usize, message: String },
}
