use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Parse(String),
    #[error("conservation audit failed: {0}")]
    Conservation(String),
    #[error(transparent)]
    Model(#[from] relax2d::ModelError),
}

impl From<relax2d::ConfigError> for BenchError {
    fn from(e: relax2d::ConfigError) -> Self {
        BenchError::InvalidConfig(e.to_string())
    }
}
