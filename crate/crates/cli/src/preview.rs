//! Overlay rendering of one augmented sample.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ocp_core::engine::{Augmenter, BaseImage, ImageSource, OcpConfig};
use ocp_core::{BinaryMask, ImageBuffer, InstanceAnnotation};

use crate::error::CliError;
use crate::io::{encode_png, load_dataset, write_bytes, DirImages};

#[derive(Debug, Clone)]
pub struct PreviewArgs {
    pub config: OcpConfig,
    pub dataset: PathBuf,
    pub images: PathBuf,
    pub image_id: u64,
    pub out: PathBuf,
    pub paste_source: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreviewSummary {
    pub path: PathBuf,
    pub original_instances: usize,
    pub pasted_instances: usize,
}

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

fn tint(px: [u8; 3], color: [u8; 3], alpha: f32) -> [u8; 3] {
    std::array::from_fn(|c| (alpha * color[c] as f32 + (1.0 - alpha) * px[c] as f32).round() as u8)
}

fn is_edge(m: &BinaryMask, y: u32, x: u32) -> bool {
    let (h, w) = m.dims();
    y == 0
        || x == 0
        || y + 1 == h
        || x + 1 == w
        || !m.get(y - 1, x)
        || !m.get(y + 1, x)
        || !m.get(y, x - 1)
        || !m.get(y, x + 1)
}

/// Translucent fill per instance with a solid outline. Pasted instances are
/// outlined in white, original ones in their fill color.
pub fn render_overlay(
    img: &ImageBuffer,
    annotations: &[(InstanceAnnotation, bool)],
) -> ImageBuffer {
    let mut out = img.clone();
    let (h, w) = img.dims();
    for (i, (a, pasted)) in annotations.iter().enumerate() {
        let Some(seg) = &a.segmentation else { continue };
        let Ok(m) = seg.to_mask(h, w) else { continue };
        let Some(bb) = m.bbox() else { continue };
        let color = PALETTE[i % PALETTE.len()];
        let outline = if *pasted { [255, 255, 255] } else { color };
        for y in bb.y..bb.y + bb.h {
            for x in bb.x..bb.x + bb.w {
                if !m.get(y, x) {
                    continue;
                }
                let px = if is_edge(&m, y, x) {
                    outline
                } else {
                    tint(out.pixel(y, x), color, 0.45)
                };
                out.put_pixel(y, x, px);
            }
        }
    }
    out
}

pub fn run_preview(args: &PreviewArgs) -> Result<PreviewSummary, CliError> {
    args.config.validate()?;
    let base = load_dataset(&args.dataset)?;
    let paste = match &args.paste_source {
        Some(p) => Some(load_dataset(p)?),
        None => None,
    };
    let paste_ref = paste.as_ref().unwrap_or(&base);
    let Some(record) = base.images.iter().find(|im| im.id == args.image_id) else {
        let lo = base.images.iter().map(|im| im.id).min();
        let hi = base.images.iter().map(|im| im.id).max();
        let valid = match (lo, hi) {
            (Some(lo), Some(hi)) => {
                format!("valid ids: {lo}..={hi} ({} images)", base.images.len())
            }
            _ => "the dataset has no images".into(),
        };
        return Err(CliError::Validation(format!(
            "image id {} not found; {valid}",
            args.image_id
        )));
    };
    let source = DirImages::new(&args.images, &[paste_ref, &base]);
    let pixels = source.load(record.id).map_err(|e| CliError::Io {
        path: e.path.clone(),
        message: e.message.clone(),
    })?;
    let augmenter = Augmenter::from_dataset(args.config.clone(), paste_ref, Arc::new(source))?;
    let anns: Vec<InstanceAnnotation> = base
        .annotations
        .iter()
        .filter(|a| a.image_id == record.id)
        .cloned()
        .collect();
    let sample = augmenter.augment(
        BaseImage {
            image_id: record.id,
            image: &pixels,
            annotations: &anns,
        },
        0,
    )?;
    let pasted: std::collections::HashSet<u64> = sample
        .provenance
        .pastes
        .iter()
        .map(|p| p.annotation_id)
        .collect();
    let tagged: Vec<(InstanceAnnotation, bool)> = sample
        .annotations
        .iter()
        .map(|a| (a.clone(), pasted.contains(&a.id)))
        .collect();
    let overlay = render_overlay(&sample.image, &tagged);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_bytes(&args.out, &encode_png(&overlay))?;
    let pasted_instances = tagged.iter().filter(|(_, p)| *p).count();
    Ok(PreviewSummary {
        path: args.out.clone(),
        original_instances: tagged.len() - pasted_instances,
        pasted_instances,
    })
}

pub fn default_preview_path(out_dir: &Path, image_id: u64) -> PathBuf {
    out_dir.join(format!("preview_{image_id}.png"))
}
