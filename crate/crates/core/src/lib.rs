//! Occlusion-focused copy-paste augmentation for instance segmentation.
//!
//! The crate covers the COCO data model and mask codecs, mask and image
//! operations, per-instance jitter, the paste engine with occlusion-aware
//! ground-truth rewriting, and mask AP / occlusion statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blend;
pub mod coco;
pub mod engine;
pub mod error;
pub mod eval;
pub mod image;
pub mod jitter;
pub mod mask;
pub mod polygon;
pub mod pool;
pub mod rle;
pub mod seed;
pub mod stream;
pub mod synth;
pub mod transform;

pub use coco::{
    filter_fully_labelled, parse_dataset, serialize_dataset, Dataset, InstanceAnnotation,
    Segmentation,
};
pub use engine::{
    augment, AugmentedSample, Augmenter, BaseImage, ImageSource, MemoryImages, OcpConfig, Preset,
};
pub use error::{CocoError, ConfigError, EngineError, MaskError, SourceError};
pub use image::ImageBuffer;
pub use mask::{BinaryMask, PixelBox};
pub use rle::{rle_decode, rle_encode, RleMask};
pub use stream::{augment_sample, open_pool, PoolHandle};
