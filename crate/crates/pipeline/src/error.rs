//! Pipeline error types.

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("row {row}: {message}")]
    MalformedRow { row: u64, message: String },

    #[error("events for person '{person_id}' are not strictly increasing in time at index {index}")]
    NonMonotoneTimestamps { person_id: String, index: usize },

    #[error("coordinate out of range: ({lat}, {lon})")]
    BadCoordinate { lat: f64, lon: f64 },

    #[error("person '{person_id}' has fewer than {required} days of stays for anchor inference")]
    InsufficientStays { person_id: String, required: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("provider '{provider}' failed: {message}")]
    Provider { provider: String, message: String },

    #[error(transparent)]
    Core(#[from] modechoice_core::CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
