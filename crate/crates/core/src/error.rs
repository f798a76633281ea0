use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("hypervector dimensionality must be positive")]
    InvalidDimension,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("bitwidth {0} is outside the supported range")]
    InvalidBitwidth(u32),
    #[error("value {value} does not fit a {bitwidth}-bit element")]
    OutOfRange { value: i64, bitwidth: u32 },
    #[error("similarity is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("accumulator overflow")]
    AccumulatorOverflow,
    #[error("no class hypervector is usable for scoring")]
    NoActiveClasses,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{}: row {row}: {msg}", path.display())]
    Parse { path: PathBuf, row: usize, msg: String },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u16),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed trace: line {line}: {msg}")]
    Trace { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
