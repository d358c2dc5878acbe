//! Files in and out: configs, datasets, images.

use std::collections::HashMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, RgbImage};
use ocp_core::engine::{ImageSource, OcpConfig, Preset};
use ocp_core::{parse_dataset, Dataset, ImageBuffer, SourceError};
use serde_json::Value;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Preset (default `ocp`) overlaid with the keys of the config file, then
/// `seed` when given. The merged document goes through the config validator.
pub fn load_config(
    path: Option<&Path>,
    preset: Option<&str>,
    seed: Option<u64>,
) -> Result<OcpConfig, CliError> {
    let preset: Preset = preset.unwrap_or("ocp").parse()?;
    let mut doc = serde_json::to_value(preset.config()).expect("config is serializable");
    if let Some(path) = path {
        let raw = read_text(path)?;
        let file: Value = serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("invalid config: {}: {e}", path.display())))?;
        let Value::Object(keys) = file else {
            return Err(CliError::Config(format!(
                "invalid config: {}: expected a JSON object",
                path.display()
            )));
        };
        let target = doc.as_object_mut().expect("config serializes to an object");
        for (k, v) in keys {
            target.insert(k, v);
        }
    }
    if let Some(seed) = seed {
        doc["seed"] = seed.into();
    }
    Ok(OcpConfig::from_json(&doc.to_string())?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let raw = read_text(path)?;
    let d = parse_dataset(&raw)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    d.validate()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    for (id, stored, raster) in d.stale_areas() {
        log::warn!("annotation {id}: stored area {stored} differs from mask area {raster}");
    }
    Ok(d)
}

pub fn decode_image(path: &Path) -> Result<ImageBuffer, String> {
    let img = image::open(path).map_err(|e| e.to_string())?.into_rgb8();
    let (w, h) = img.dimensions();
    ImageBuffer::from_raw(h, w, img.into_raw()).map_err(|e| e.to_string())
}

pub fn encode_png(img: &ImageBuffer) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(Cursor::new(&mut out))
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            ExtendedColorType::Rgb8,
        )
        .expect("in-memory PNG encoding does not fail");
    out
}

pub fn encode_jpeg(img: &ImageBuffer) -> Vec<u8> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(Cursor::new(&mut out), 95)
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            ExtendedColorType::Rgb8,
        )
        .expect("in-memory JPEG encoding does not fail");
    out
}

pub fn to_rgb_image(img: &ImageBuffer) -> RgbImage {
    RgbImage::from_raw(img.width(), img.height(), img.as_raw().to_vec())
        .expect("buffer length matches")
}

/// Images under a root directory, addressed through the `file_name` of a
/// dataset's image records.
#[derive(Debug, Clone)]
pub struct DirImages {
    root: PathBuf,
    files: Arc<HashMap<u64, (String, u32, u32)>>,
}

impl DirImages {
    pub fn new(root: &Path, datasets: &[&Dataset]) -> Self {
        let files = datasets
            .iter()
            .flat_map(|d| d.images.iter())
            .map(|im| (im.id, (im.file_name.clone(), im.height, im.width)))
            .collect();
        Self {
            root: root.to_path_buf(),
            files: Arc::new(files),
        }
    }

    pub fn path_of(&self, image_id: u64) -> Option<PathBuf> {
        self.files.get(&image_id).map(|(f, _, _)| self.root.join(f))
    }
}

impl ImageSource for DirImages {
    fn load(&self, image_id: u64) -> Result<Arc<ImageBuffer>, SourceError> {
        let Some((file, h, w)) = self.files.get(&image_id) else {
            return Err(SourceError {
                image_id,
                path: String::new(),
                message: "image id not in dataset".into(),
            });
        };
        let path = self.root.join(file);
        let err = |message: String| SourceError {
            image_id,
            path: path.display().to_string(),
            message,
        };
        let img = decode_image(&path).map_err(err)?;
        if img.dims() != (*h, *w) {
            return Err(err(format!(
                "decoded size {}x{} differs from the record's {}x{}",
                img.width(),
                img.height(),
                w,
                h
            )));
        }
        Ok(Arc::new(img))
    }
}
