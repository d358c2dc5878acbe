//! Offline dataset generation.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ocp_core::coco::ImageRecord;
use ocp_core::engine::{Augmenter, BaseImage, ImageSource, OcpConfig, ProvenanceRecord};
use ocp_core::{serialize_dataset, Dataset, InstanceAnnotation};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{encode_jpeg, encode_png, load_dataset, write_bytes, DirImages};

#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub config: OcpConfig,
    pub config_path: Option<PathBuf>,
    pub dataset: PathBuf,
    pub images: PathBuf,
    pub out: PathBuf,
    pub epochs: u64,
    /// Annotation file the paste pool is built from; defaults to `dataset`.
    pub paste_source: Option<PathBuf>,
    pub jpeg: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub images_processed: u64,
    pub images_skipped: u64,
    pub instances_pasted: u64,
    pub instances_removed: u64,
    pub output_annotations: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_ms: f64,
    pub load_ms: f64,
    pub augment_ms_total: f64,
    pub augment_ms_p50: f64,
    pub augment_ms_p95: f64,
    pub encode_ms_total: f64,
    pub write_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub image_id: u64,
    pub epoch: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: OcpConfig,
    pub config_path: Option<String>,
    pub dataset: String,
    pub images: String,
    pub paste_source: Option<String>,
    pub out: String,
    pub seed: u64,
    pub epochs: u64,
    pub image_format: String,
    pub counts: Counts,
    pub skipped_images: Vec<SkippedImage>,
    pub timings: Timings,
}

/// Output annotation id and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdMapEntry {
    pub output_id: u64,
    /// Original dataset id for a base annotation, `None` for a paste.
    pub source_id: Option<u64>,
    /// For pastes, the pasted instance's id in the paste dataset.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pasted_from: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceLine {
    pub output_image_id: u64,
    pub file_name: String,
    pub id_map: Vec<IdMapEntry>,
    #[serde(flatten)]
    pub record: ProvenanceRecord,
}

struct Done {
    image: ImageRecord,
    annotations: Vec<InstanceAnnotation>,
    provenance: ProvenanceRecord,
    bytes: Vec<u8>,
    load_ms: f64,
    augment_ms: f64,
    encode_ms: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn staging_dir(out: &Path) -> Result<PathBuf, CliError> {
    let name = out
        .file_name()
        .ok_or_else(|| CliError::io(out, "output path has no final component"))?
        .to_string_lossy();
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok(parent.join(format!(".{name}.tmp-{}", std::process::id())))
}

/// Writes augmented images, `annotations.json`, `provenance.jsonl` and
/// `manifest.json` into `args.out`, which must not exist yet. Everything is
/// staged in a sibling directory and renamed into place at the end.
pub fn run_generate(args: &GenerateArgs) -> Result<RunManifest, CliError> {
    let wall = Instant::now();
    args.config.validate()?;
    if args.epochs == 0 {
        return Err(CliError::Config(
            "invalid config: epochs must be positive".into(),
        ));
    }
    if args.out.exists() {
        return Err(CliError::io(&args.out, "output directory already exists"));
    }
    let base = load_dataset(&args.dataset)?;
    let paste = match &args.paste_source {
        Some(p) => Some(load_dataset(p)?),
        None => None,
    };
    let paste_ref = paste.as_ref().unwrap_or(&base);
    let source = DirImages::new(&args.images, &[paste_ref, &base]);
    let augmenter =
        Augmenter::from_dataset(args.config.clone(), paste_ref, Arc::new(source.clone()))?;

    let stage = staging_dir(&args.out)?;
    if stage.exists() {
        std::fs::remove_dir_all(&stage).map_err(|e| CliError::io(&stage, e))?;
    }
    std::fs::create_dir_all(stage.join("images")).map_err(|e| CliError::io(&stage, e))?;
    let result = generate_into(args, &base, &source, &augmenter, &stage, wall);
    match result {
        Ok(manifest) => {
            std::fs::rename(&stage, &args.out).map_err(|e| CliError::io(&args.out, e))?;
            Ok(manifest)
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&stage);
            Err(e)
        }
    }
}

fn generate_into(
    args: &GenerateArgs,
    base: &Dataset,
    source: &DirImages,
    augmenter: &Augmenter,
    stage: &Path,
    wall: Instant,
) -> Result<RunManifest, CliError> {
    let index = base.index();
    let ext = if args.jpeg { "jpg" } else { "png" };
    let jobs: Vec<(u64, &ImageRecord)> = (0..args.epochs)
        .flat_map(|e| base.images.iter().map(move |im| (e, im)))
        .collect();

    let mut out_images = Vec::new();
    let mut out_annotations = Vec::new();
    let mut provenance = Vec::new();
    let mut counts = Counts::default();
    let mut skipped_images = Vec::new();
    let mut timings = Timings::default();
    let mut augment_ms = Vec::with_capacity(jobs.len());
    let mut next_image = 1u64;
    let mut next_ann = 1u64;

    let chunk = (rayon::current_num_threads() * 4).max(1);
    for batch in jobs.chunks(chunk) {
        let results: Vec<Result<Done, SkippedImage>> = batch
            .par_iter()
            .map(|&(epoch, im)| {
                let skip = |reason: String| SkippedImage {
                    image_id: im.id,
                    epoch,
                    reason,
                };
                let t = Instant::now();
                let pixels = source.load(im.id).map_err(|e| skip(e.to_string()))?;
                let load_ms = ms(t);
                let anns: Vec<InstanceAnnotation> = index
                    .annotations_of(im.id)
                    .iter()
                    .map(|&i| base.annotations[i].clone())
                    .collect();
                let t = Instant::now();
                let sample = augmenter
                    .augment(
                        BaseImage {
                            image_id: im.id,
                            image: &pixels,
                            annotations: &anns,
                        },
                        epoch,
                    )
                    .map_err(|e| skip(e.to_string()))?;
                let augment_ms = ms(t);
                let t = Instant::now();
                let bytes = if args.jpeg {
                    encode_jpeg(&sample.image)
                } else {
                    encode_png(&sample.image)
                };
                Ok(Done {
                    image: im.clone(),
                    annotations: sample.annotations,
                    provenance: sample.provenance,
                    bytes,
                    load_ms,
                    augment_ms,
                    encode_ms: ms(t),
                })
            })
            .collect();

        let t = Instant::now();
        for r in results {
            let done = match r {
                Ok(d) => d,
                Err(s) => {
                    log::warn!(
                        "image {} (epoch {}) skipped: {}",
                        s.image_id,
                        s.epoch,
                        s.reason
                    );
                    counts.images_skipped += 1;
                    skipped_images.push(s);
                    continue;
                }
            };
            let image_id = next_image;
            next_image += 1;
            let stem = Path::new(&done.image.file_name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| done.image.id.to_string());
            let file_name = format!("e{:03}_{stem}.{ext}", done.provenance.epoch);
            write_bytes(&stage.join("images").join(&file_name), &done.bytes)?;

            let pasted_from: std::collections::HashMap<u64, u64> = done
                .provenance
                .pastes
                .iter()
                .map(|p| (p.annotation_id, p.source_annotation_id))
                .collect();
            let mut id_map = Vec::with_capacity(done.annotations.len());
            for mut a in done.annotations {
                let from = pasted_from.get(&a.id).copied();
                id_map.push(IdMapEntry {
                    output_id: next_ann,
                    source_id: if from.is_some() { None } else { Some(a.id) },
                    pasted_from: from,
                });
                a.id = next_ann;
                a.image_id = image_id;
                next_ann += 1;
                out_annotations.push(a);
            }
            counts.images_processed += 1;
            counts.instances_pasted += done.provenance.pastes.len() as u64;
            counts.instances_removed += done.provenance.removed_annotation_ids.len() as u64;
            timings.load_ms += done.load_ms;
            timings.augment_ms_total += done.augment_ms;
            timings.encode_ms_total += done.encode_ms;
            augment_ms.push(done.augment_ms);
            out_images.push(ImageRecord {
                id: image_id,
                file_name: format!("images/{file_name}"),
                height: done.image.height,
                width: done.image.width,
                extra: done.image.extra,
            });
            provenance.push(ProvenanceLine {
                output_image_id: image_id,
                file_name: format!("images/{file_name}"),
                id_map,
                record: done.provenance,
            });
        }
        timings.write_ms += ms(t);
    }
    counts.output_annotations = out_annotations.len() as u64;

    let t = Instant::now();
    let merged = Dataset {
        images: out_images,
        annotations: out_annotations,
        categories: base.categories.clone(),
        extra: base.extra.clone(),
    };
    write_bytes(
        &stage.join("annotations.json"),
        serialize_dataset(&merged)?.as_bytes(),
    )?;
    let mut lines = String::new();
    for p in &provenance {
        lines.push_str(&serde_json::to_string(p).expect("provenance is serializable"));
        lines.push('\n');
    }
    write_bytes(&stage.join("provenance.jsonl"), lines.as_bytes())?;
    timings.write_ms += ms(t);

    augment_ms.sort_by(f64::total_cmp);
    timings.augment_ms_p50 = percentile(&augment_ms, 0.50);
    timings.augment_ms_p95 = percentile(&augment_ms, 0.95);
    timings.wall_ms = ms(wall);
    let manifest = RunManifest {
        config: args.config.clone(),
        config_path: args.config_path.as_ref().map(|p| p.display().to_string()),
        dataset: args.dataset.display().to_string(),
        images: args.images.display().to_string(),
        paste_source: args.paste_source.as_ref().map(|p| p.display().to_string()),
        out: args.out.display().to_string(),
        seed: args.config.seed,
        epochs: args.epochs,
        image_format: if args.jpeg { "jpeg" } else { "png" }.into(),
        counts,
        skipped_images,
        timings,
    };
    write_bytes(
        &stage.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest is serializable")
            .as_bytes(),
    )?;
    Ok(manifest)
}
