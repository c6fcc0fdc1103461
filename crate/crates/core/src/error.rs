use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported format {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("zero-dimension image {path}")]
    ZeroDimension { path: PathBuf },

    #[error("image too small: {width}x{height}, descriptors need at least 2x2")]
    ImageTooSmall { width: usize, height: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate path in manifest: {0}")]
    DuplicatePath(String),

    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("invalid derivative order {order}: {reason}")]
    InvalidOrder { order: usize, reason: &'static str },

    #[error("invalid bin count {bins}: {reason}")]
    InvalidBins { bins: usize, reason: &'static str },

    #[error("region grid {rows}x{cols} does not fit a {width}x{height} image")]
    GridTooLarge {
        rows: usize,
        cols: usize,
        width: usize,
        height: usize,
    },

    #[error("feature length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty gallery")]
    EmptyGallery,

    #[error("dataset needs at least {needed} images, has {found}")]
    TooFewImages { needed: usize, found: usize },

    #[error("probe split leaves class {0} without a gallery image")]
    EmptyGalleryClass(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
