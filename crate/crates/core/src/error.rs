use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A cell, simulation or classifier parameter is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A bitmap does not fit the cell it is interpreted against.
    #[error("bitmap has {actual} groups, cell expects {expected}")]
    BitmapWidth { expected: usize, actual: usize },

    /// A grant references an RNTI that was never announced in a random access response.
    #[error("log integrity: grant at subframe {subframe} for rnti {rnti} has no prior RAR event")]
    UnannouncedRnti { subframe: u64, rnti: u16 },

    #[error("rnti {0} not present in log")]
    UnknownRnti(u16),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Nothing left after zero removal.
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("cannot stratify: {0}")]
    Stratify(String),

    #[error("feature dimension mismatch: model expects {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
