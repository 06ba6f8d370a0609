use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("erosion empty: 2r = {0} exceeds the shortest window side")]
    ErosionEmpty(f64),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("malformed value at row {row}: {message}")]
    MalformedRow { row: u64, message: String },
    #[error("out-of-window point at row {0}")]
    OutOfWindowRow(u64),
    #[error("point outside window")]
    OutOfWindow,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("no points")]
    NoPoints,
    #[error("invalid bandwidth")]
    InvalidBandwidth,
    #[error("cannot rescale a zero-mass surface")]
    CannotRescale,
    #[error("null intensity undefined for species {0}")]
    NullIntensityUndefined(String),
    #[error("insufficient points")]
    InsufficientPoints,
    #[error("invalid distance grid: {0}")]
    InvalidGrid(String),
    #[error("incompatible grids")]
    IncompatibleGrids,
    #[error("empty range")]
    EmptyRange,
    #[error("nothing to pair")]
    NothingToPair,
    #[error("need at least {0} simulations")]
    NotEnoughSimulations(usize),
    #[error("one-sided version not available for this deviation kind")]
    OneSidedUnavailable,
    #[error("unknown species {0}")]
    UnknownSpecies(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
