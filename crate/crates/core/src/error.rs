use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("mask dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("buffer length {actual} does not match expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("RLE counts sum to {sum} but size {height}x{width} needs {expected}")]
    RleCountSum {
        sum: u64,
        expected: u64,
        height: u32,
        width: u32,
    },
    #[error("invalid compressed RLE string at byte {offset}")]
    RleString { offset: usize },
    #[error("polygon {index} has {vertices} vertices, at least 3 required")]
    DegeneratePolygon { index: usize, vertices: usize },
    #[error("polygon {index} has an odd number of coordinates ({len})")]
    OddCoordinates { index: usize, len: usize },
    #[error("gaussian kernel size must be odd and >= 1, got {0}")]
    KernelSize(u32),
    #[error("gaussian sigma must be positive, got {0}")]
    Sigma(f64),
}

#[derive(Debug, Error)]
pub enum CocoError {
    #[error("malformed JSON at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("annotation {annotation_id}: {source}")]
    Segmentation {
        annotation_id: u64,
        #[source]
        source: MaskError,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("image {image_id}: buffer is {actual:?} but the record says {expected:?}")]
    BaseDimensions {
        image_id: u64,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("annotation {annotation_id}: {source}")]
    Annotation {
        annotation_id: u64,
        #[source]
        source: MaskError,
    },
}

/// Failure to fetch source pixels for a paste candidate.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot load image {image_id} ({path}): {message}")]
pub struct SourceError {
    pub image_id: u64,
    pub path: String,
    pub message: String,
}
