//! Crate-wide error type.

use thiserror::Error;

use crate::alphabet::Polarity;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box [{x1}, {y1}, {x2}, {y2}]: corners must be finite with x1 <= x2 and y1 <= y2")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("confidence {0} is outside [0, 1]")]
    InvalidConfidence(f64),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("unknown class {name:?}")]
    UnknownClass { name: String },

    #[error("window width must be positive and finite, got {0}")]
    InvalidWindowWidth(f64),

    #[error("non-finite pixel value at row {row}, column {col}")]
    NonFinitePixel { row: usize, col: usize },

    #[error("ground truth for class {class} is marked absent but carries boxes")]
    BoxesOnAbsentTruth { class: String },

    #[error("duplicate ground-truth entry for class {class} on slice {slice_id}")]
    DuplicateClassTruth { slice_id: String, class: String },

    #[error("slice {slice_id} has {count} detections, above the limit of {max}")]
    TooManyDetections { slice_id: String, count: usize, max: usize },

    #[error("duplicate slice id {slice_id}")]
    DuplicateSliceId { slice_id: String },

    #[error("reader {reader_id} on slice {slice_id} must rate every class of the alphabet exactly once")]
    ReaderCoverage { slice_id: String, reader_id: String },

    #[error("calibration requires at least one sample")]
    EmptyCalibration,

    #[error("no calibration group for ({class}, {polarity})")]
    MissingGroup { class: String, polarity: Polarity },

    #[error("{name} threshold {value} is outside [0, 1]")]
    InvalidThreshold { name: &'static str, value: f64 },

    #[error("slice {slice_id} carries no ground truth")]
    MissingGroundTruth { slice_id: String },

    #[error("regime {regime} cannot drive this selection: {reason}")]
    InvalidRegime { regime: String, reason: String },

    #[error("no grid cell qualifies for selection")]
    NoSelection,

    #[error("slice {slice_id} carries no reader opinions")]
    MissingReaders { slice_id: String },

    #[error("split fractions {fractions:?} must be non-negative and sum to 1")]
    InvalidFractions { fractions: [f64; 4] },

    #[error("cannot split an empty sample list")]
    EmptySplit,

    #[error("invalid simulator configuration: {0}")]
    InvalidSimConfig(String),

    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },

    #[error("model file format version {found} is not supported (expected {expected})")]
    ModelVersion { expected: u32, found: u32 },

    #[error("model file violates an invariant: {0}")]
    ModelInvariant(String),

    #[error("grid cell (iou {iou}, conformal {conformal}): {source}")]
    SweepCell {
        iou: f64,
        conformal: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
