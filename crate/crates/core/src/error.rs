use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(String),

    #[error("malformed header: {0}")]
    Header(String),

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column} ({name}): malformed symptom token {token:?}")]
    MalformedToken {
        row: usize,
        column: usize,
        name: String,
        token: String,
    },

    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },

    #[error("row {row}: unknown cause {cause:?}")]
    UnknownCause { row: usize, cause: String },

    #[error("unknown site {0:?}")]
    UnknownSite(String),

    #[error("record {0:?} has no cause label")]
    Unlabeled(String),

    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid level table: {0}")]
    LevelTable(String),

    #[error("invalid condition: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown algorithm {0:?} (expected tariff, interva-q, interva-f, insilico-q or insilico-f)")]
    UnknownAlgorithm(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("incomplete block design: {0}")]
    IncompleteDesign(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
