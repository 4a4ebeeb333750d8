use thiserror::Error;

/// Errors shared across the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    #[error("mrm entry ({row},{col}) = {value} outside [-2, 2]")]
    MrmRange { row: usize, col: usize, value: f64 },

    #[error("mrm dimensions {rows}x{cols}, expected 10x10")]
    MrmShape { rows: usize, cols: usize },

    #[error("genome length {0}, expected 100")]
    GenomeLength(usize),

    #[error("cohort line {line}: {msg}")]
    Cohort { line: usize, msg: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("group '{0}' absent from dataset")]
    UnknownGroup(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("degenerate labels: committee training needs both viable and nonviable points")]
    DegenerateLabels,

    #[error("region too thin: acceptance rate {rate:.4} after {proposals} proposals")]
    RegionTooThin { rate: f64, proposals: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
