//! The copy-paste pipeline: gate, basket, candidates, sequential pasting and
//! ground-truth rewriting.

mod candidates;
mod config;
mod placement;
mod rewrite;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use candidates::{
    select_candidates, size_ratio, BlendParams, ImageSource, MemoryImages, PasteCandidate,
    SkippedCandidate,
};
pub use config::{Blend, OcpConfig, Placement, Preset, ScaleAware};
pub use placement::{
    choose_position_random, choose_position_targeted, sample_basket, scale_aware_factor,
};
pub use rewrite::{update_ground_truth, MaskedAnnotation, Visibility};

use crate::blend::gaussian_alpha;
use crate::coco::{Dataset, InstanceAnnotation, Segmentation};
use crate::error::EngineError;
use crate::image::{composite_into, paste_masked, ImageBuffer};
use crate::jitter::JitterParams;
use crate::mask::PixelBox;
use crate::pool::{build_instance_pool, InstancePool};
use crate::rle::rle_encode;
use crate::seed::{sample_rng, sample_seed};

/// The image being augmented and its annotations.
#[derive(Debug, Clone, Copy)]
pub struct BaseImage<'a> {
    pub image_id: u64,
    pub image: &'a ImageBuffer,
    pub annotations: &'a [InstanceAnnotation],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasteRecord {
    /// Id of the new annotation inside the augmented sample.
    pub annotation_id: u64,
    pub source_annotation_id: u64,
    pub source_image_id: u64,
    /// Top-left corner of the patch; may be negative.
    pub position: [i64; 2],
    /// Patch `[height, width]` after jitter and scaling.
    pub size: [u32; 2],
    pub jitter: JitterParams,
    pub scale: f64,
    pub blend: Option<BlendParams>,
    /// In-bounds mask area at paste time.
    pub area: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleFraction {
    pub annotation_id: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub base_image_id: u64,
    pub seed: u64,
    pub epoch: u64,
    pub sample_seed: u64,
    /// Outcome of the `p_cp` draw.
    pub applied: bool,
    pub basket: Vec<u64>,
    /// In paste order.
    pub pastes: Vec<PasteRecord>,
    pub skipped: Vec<SkippedCandidate>,
    pub removed_annotation_ids: Vec<u64>,
    /// One entry per output annotation that carries a mask.
    pub visible_fractions: Vec<VisibleFraction>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl ProvenanceRecord {
    fn new(base_image_id: u64, seed: u64, epoch: u64) -> Self {
        Self {
            base_image_id,
            seed,
            epoch,
            sample_seed: sample_seed(seed, base_image_id, epoch),
            applied: false,
            basket: Vec::new(),
            pastes: Vec::new(),
            skipped: Vec::new(),
            removed_annotation_ids: Vec::new(),
            visible_fractions: Vec::new(),
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub image: ImageBuffer,
    pub annotations: Vec<InstanceAnnotation>,
    pub provenance: ProvenanceRecord,
}

/// Working state after [`paste_sequence`].
#[derive(Debug, Clone)]
pub struct PasteOutcome {
    pub image: ImageBuffer,
    /// Base survivors in input order, then pasted survivors in paste order.
    pub annotations: Vec<MaskedAnnotation>,
    pub pastes: Vec<PasteRecord>,
    pub skipped: Vec<SkippedCandidate>,
    pub removed_annotation_ids: Vec<u64>,
}

/// Rasterizes the masks of `annotations` at `dims`. Annotations without a
/// segmentation are not part of the result.
pub fn masked_annotations(
    annotations: &[InstanceAnnotation],
    dims: (u32, u32),
) -> Result<Vec<MaskedAnnotation>, EngineError> {
    annotations
        .iter()
        .filter_map(|a| {
            let seg = a.segmentation.as_ref()?;
            Some(
                seg.to_mask(dims.0, dims.1)
                    .map(|m| MaskedAnnotation::new(a.clone(), m))
                    .map_err(|source| EngineError::Annotation {
                        annotation_id: a.id,
                        source,
                    }),
            )
        })
        .collect()
}

/// Pastes `candidates` one after another. Each paste is placed, composited,
/// subtracted from every current annotation (earlier pastes included) and
/// then added as a new annotation with id `next_id`, `next_id + 1`, ...
/// Candidates whose in-bounds part fails the visibility floor or the size
/// ratio are not composited.
pub fn paste_sequence<R: Rng + ?Sized>(
    image: &ImageBuffer,
    image_id: u64,
    annotations: Vec<MaskedAnnotation>,
    candidates: Vec<PasteCandidate>,
    config: &OcpConfig,
    rng: &mut R,
    mut next_id: u64,
) -> Result<PasteOutcome, EngineError> {
    let dest = image.dims();
    let (h, w) = dest;
    let visibility = Visibility {
        threshold: config.visibility_threshold,
        min_visible_px: config.min_visible_px,
    };
    let mut out = PasteOutcome {
        image: image.clone(),
        annotations,
        pastes: Vec::new(),
        skipped: Vec::new(),
        removed_annotation_ids: Vec::new(),
    };
    for cand in candidates {
        let cdims = cand.mask.dims();
        let (x, y) = match config.placement {
            config::Placement::Random => choose_position_random(rng, dest, cdims),
            config::Placement::Targeted => {
                let boxes: Vec<PixelBox> = out
                    .annotations
                    .iter()
                    .filter_map(|a| a.mask.bbox())
                    .collect();
                choose_position_targeted(rng, &boxes, cdims, dest, config.targeted_expand)
            }
        };
        let placed = cand.mask.place_on_canvas(h, w, x, y);
        let area = placed.area();
        let skip = |reason: String| SkippedCandidate {
            source_annotation_id: cand.source_annotation_id,
            source_image_id: cand.source_image_id,
            reason,
        };
        if !visibility.passes(area, area) {
            out.skipped.push(skip(format!(
                "in-bounds area {area} below the visibility floor"
            )));
            continue;
        }
        let ratio = size_ratio(area, dest);
        if ratio < config.min_size_ratio {
            out.skipped.push(skip(format!(
                "in-bounds size ratio {ratio:.4} below min_size_ratio {}",
                config.min_size_ratio
            )));
            continue;
        }
        match cand.blend {
            None => paste_masked(&mut out.image, &cand.patch, &cand.mask, (x, y)),
            Some(b) => {
                let alpha = gaussian_alpha(&cand.mask, b.kernel, b.sigma)?;
                composite_into(&mut out.image, &cand.patch, &alpha, (x, y))?;
            }
        }
        out.removed_annotation_ids.extend(update_ground_truth(
            &mut out.annotations,
            &placed,
            visibility,
        ));

        let annotation = InstanceAnnotation {
            id: next_id,
            image_id,
            category_id: cand.category_id,
            segmentation: None,
            area: 0.0,
            bbox: [0.0; 4],
            iscrowd: 0,
            extra: Default::default(),
        };
        let mut pasted = MaskedAnnotation::new(annotation, placed);
        pasted.pasted = true;
        pasted.changed = true;
        out.annotations.push(pasted);
        out.pastes.push(PasteRecord {
            annotation_id: next_id,
            source_annotation_id: cand.source_annotation_id,
            source_image_id: cand.source_image_id,
            position: [x, y],
            size: [cdims.0, cdims.1],
            jitter: cand.jitter,
            scale: cand.scale,
            blend: cand.blend,
            area,
        });
        next_id += 1;
    }
    Ok(out)
}

/// Runs the pipeline on one base image with a caller-supplied stream. The
/// provenance seed fields are left for the caller.
pub fn augment_with_rng<R: Rng + ?Sized>(
    base: BaseImage<'_>,
    pool: &InstancePool,
    source: &dyn ImageSource,
    config: &OcpConfig,
    rng: &mut R,
    provenance: ProvenanceRecord,
) -> Result<AugmentedSample, EngineError> {
    let mut provenance = provenance;
    let identity = |provenance: ProvenanceRecord| AugmentedSample {
        image: base.image.clone(),
        annotations: base.annotations.to_vec(),
        provenance,
    };
    if rng.gen::<f64>() >= config.p_cp {
        provenance.note = Some("skipped by p_cp".into());
        return Ok(identity(provenance));
    }
    provenance.applied = true;
    let dims = base.image.dims();
    let masked = masked_annotations(base.annotations, dims)?;

    provenance.basket = sample_basket(rng, pool, config.n_basket, base.image_id);
    if provenance.basket.is_empty() {
        provenance.note = Some("no candidates".into());
        return Ok(identity(provenance));
    }
    let sides: Vec<f64> = masked
        .iter()
        .filter(|a| a.reference_area > 0)
        .map(|a| (a.reference_area as f64).sqrt())
        .collect();
    let (candidates, skipped) =
        select_candidates(rng, pool, &provenance.basket, source, config, dims, &sides);
    provenance.skipped = skipped;
    if candidates.is_empty() {
        provenance.note = Some("no candidates".into());
        return Ok(identity(provenance));
    }

    let next_id = base
        .annotations
        .iter()
        .map(|a| a.id)
        .max()
        .map_or(1, |m| m + 1);
    let outcome = paste_sequence(
        base.image,
        base.image_id,
        masked,
        candidates,
        config,
        rng,
        next_id,
    )?;
    provenance.skipped.extend(outcome.skipped);
    provenance.pastes = outcome.pastes;
    provenance.removed_annotation_ids = outcome.removed_annotation_ids;
    if provenance.pastes.is_empty() {
        provenance.note = Some("no candidates".into());
        return Ok(identity(provenance));
    }

    let mut annotations = Vec::with_capacity(outcome.annotations.len());
    let mut survivors = outcome.annotations.into_iter().peekable();
    // unmasked annotations keep their input position among base survivors
    for a in base.annotations {
        if a.segmentation.is_none() {
            annotations.push(a.clone());
            continue;
        }
        if let Some(m) = survivors.next_if(|m| !m.pasted && m.annotation.id == a.id) {
            annotations.push(finish(m, &mut provenance));
        }
    }
    for m in survivors {
        annotations.push(finish(m, &mut provenance));
    }
    Ok(AugmentedSample {
        image: outcome.image,
        annotations,
        provenance,
    })
}

fn finish(mut m: MaskedAnnotation, provenance: &mut ProvenanceRecord) -> InstanceAnnotation {
    provenance.visible_fractions.push(VisibleFraction {
        annotation_id: m.annotation.id,
        fraction: m.visible_fraction(),
    });
    m.refresh_fields();
    if m.changed {
        m.annotation.segmentation = Some(Segmentation::Rle(rle_encode(&m.mask)));
    }
    m.annotation
}

/// Runs the pipeline with the stream derived from `(config.seed, image id, epoch)`.
pub fn augment(
    base: BaseImage<'_>,
    pool: &InstancePool,
    source: &dyn ImageSource,
    config: &OcpConfig,
    epoch: u64,
) -> Result<AugmentedSample, EngineError> {
    config.validate()?;
    let mut rng = sample_rng(config.seed, base.image_id, epoch);
    let provenance = ProvenanceRecord::new(base.image_id, config.seed, epoch);
    augment_with_rng(base, pool, source, config, &mut rng, provenance)
}

/// A validated config bound to an immutable pool and image source. Cheap to
/// clone and safe to share across threads.
#[derive(Clone)]
pub struct Augmenter {
    config: OcpConfig,
    pool: Arc<InstancePool>,
    source: Arc<dyn ImageSource>,
}

impl Augmenter {
    pub fn new(
        config: OcpConfig,
        pool: Arc<InstancePool>,
        source: Arc<dyn ImageSource>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            config,
            pool,
            source,
        })
    }

    /// Builds the pool from `paste_dataset` restricted to the configured
    /// paste categories.
    pub fn from_dataset(
        config: OcpConfig,
        paste_dataset: &Dataset,
        source: Arc<dyn ImageSource>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let pool = build_instance_pool(paste_dataset, 0.0, &config.paste_category_ids);
        Self::new(config, Arc::new(pool), source)
    }

    pub fn config(&self) -> &OcpConfig {
        &self.config
    }

    pub fn pool(&self) -> &InstancePool {
        &self.pool
    }

    pub fn augment(&self, base: BaseImage<'_>, epoch: u64) -> Result<AugmentedSample, EngineError> {
        augment(base, &self.pool, self.source.as_ref(), &self.config, epoch)
    }

    /// Same as [`Augmenter::augment`] with the seed overridden.
    pub fn augment_seeded(
        &self,
        base: BaseImage<'_>,
        seed: u64,
        epoch: u64,
    ) -> Result<AugmentedSample, EngineError> {
        let config = OcpConfig {
            seed,
            ..self.config.clone()
        };
        augment(base, &self.pool, self.source.as_ref(), &config, epoch)
    }
}

impl std::fmt::Debug for Augmenter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Augmenter")
            .field("config", &self.config)
            .field("pool_entries", &self.pool.len())
            .finish_non_exhaustive()
    }
}
