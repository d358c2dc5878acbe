//! Per-iteration entry points for training dataloaders: open a pool once,
//! then augment samples from any number of threads.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::coco::{parse_dataset, InstanceAnnotation};
use crate::engine::{AugmentedSample, Augmenter, BaseImage, ImageSource, OcpConfig};
use crate::error::{CocoError, ConfigError, EngineError};
use crate::image::ImageBuffer;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] CocoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Immutable pool, config and image dimensions. Clones share the pool.
#[derive(Debug, Clone)]
pub struct PoolHandle {
    augmenter: Augmenter,
    dims: Arc<HashMap<u64, (u32, u32)>>,
}

impl PoolHandle {
    pub fn config(&self) -> &OcpConfig {
        self.augmenter.config()
    }

    pub fn augmenter(&self) -> &Augmenter {
        &self.augmenter
    }
}

/// Parses and validates `config_json` with the same validator as config
/// files, loads the dataset at `dataset_path` and indexes its instances.
pub fn open_pool(
    dataset_path: &Path,
    source: Arc<dyn ImageSource>,
    config_json: &str,
) -> Result<PoolHandle, StreamError> {
    let config = OcpConfig::from_json(config_json)?;
    let raw = std::fs::read_to_string(dataset_path).map_err(|source| StreamError::Io {
        path: dataset_path.display().to_string(),
        source,
    })?;
    let dataset = parse_dataset(&raw)?;
    dataset.validate()?;
    let dims = dataset
        .images
        .iter()
        .map(|im| (im.id, (im.height, im.width)))
        .collect();
    let augmenter = Augmenter::from_dataset(config, &dataset, source)?;
    Ok(PoolHandle {
        augmenter,
        dims: Arc::new(dims),
    })
}

/// Augments one sample. `image` must match the dataset record of `image_id`
/// when the dataset has one.
pub fn augment_sample(
    handle: &PoolHandle,
    image_id: u64,
    image: &ImageBuffer,
    annotations: &[InstanceAnnotation],
    seed: u64,
    epoch: u64,
) -> Result<AugmentedSample, StreamError> {
    if let Some(&expected) = handle.dims.get(&image_id) {
        if expected != image.dims() {
            return Err(EngineError::BaseDimensions {
                image_id,
                expected,
                actual: image.dims(),
            }
            .into());
        }
    }
    let base = BaseImage {
        image_id,
        image,
        annotations,
    };
    Ok(handle.augmenter.augment_seeded(base, seed, epoch)?)
}
