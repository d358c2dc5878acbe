//! Source pixel access and paste-candidate preparation.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Blend, OcpConfig};
use super::placement::scale_aware_factor;
use crate::error::SourceError;
use crate::image::ImageBuffer;
use crate::jitter::{apply_color_jitter, sample_jitter, JitterParams};
use crate::mask::BinaryMask;
use crate::pool::{InstancePool, PoolEntry};
use crate::transform::affine_patch;

/// Read access to source images by id. Implementations must be shareable
/// across worker threads.
pub trait ImageSource: Send + Sync {
    fn load(&self, image_id: u64) -> Result<Arc<ImageBuffer>, SourceError>;
}

/// Images held in memory, keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct MemoryImages {
    images: HashMap<u64, Arc<ImageBuffer>>,
}

impl MemoryImages {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_id: u64, image: ImageBuffer) {
        self.images.insert(image_id, Arc::new(image));
    }

    pub fn get(&self, image_id: u64) -> Option<&ImageBuffer> {
        self.images.get(&image_id).map(|a| a.as_ref())
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

impl FromIterator<(u64, ImageBuffer)> for MemoryImages {
    fn from_iter<T: IntoIterator<Item = (u64, ImageBuffer)>>(iter: T) -> Self {
        let mut m = MemoryImages::new();
        for (id, img) in iter {
            m.insert(id, img);
        }
        m
    }
}

impl ImageSource for MemoryImages {
    fn load(&self, image_id: u64) -> Result<Arc<ImageBuffer>, SourceError> {
        self.images
            .get(&image_id)
            .cloned()
            .ok_or_else(|| SourceError {
                image_id,
                path: format!("memory:{image_id}"),
                message: "no such image".into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendParams {
    pub kernel: u32,
    pub sigma: f64,
}

/// A jittered, scaled instance ready to be placed.
#[derive(Debug, Clone)]
pub struct PasteCandidate {
    pub source_annotation_id: u64,
    pub source_image_id: u64,
    pub category_id: u64,
    pub patch: ImageBuffer,
    pub mask: BinaryMask,
    pub jitter: JitterParams,
    /// Total scale applied: jitter scale times the scale-aware factor.
    pub scale: f64,
    pub blend: Option<BlendParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub source_annotation_id: u64,
    pub source_image_id: u64,
    pub reason: String,
}

/// Equalized side of `area` relative to the destination's.
pub fn size_ratio(area: u64, dest: (u32, u32)) -> f64 {
    (area as f64).sqrt() / ((dest.0 as f64) * (dest.1 as f64)).sqrt()
}

pub(crate) fn sample_blend<R: Rng + ?Sized>(rng: &mut R, blend: &Blend) -> Option<BlendParams> {
    match *blend {
        Blend::Off => None,
        Blend::Fixed { kernel, sigma } => Some(BlendParams { kernel, sigma }),
        Blend::Random {
            kernel: [klo, khi],
            sigma: [slo, shi],
        } => {
            let odd: Vec<u32> = (klo..=khi).filter(|k| k % 2 == 1).collect();
            let kernel = odd[rng.gen_range(0..odd.len())];
            let sigma = slo + (shi - slo) * rng.gen::<f64>();
            Some(BlendParams { kernel, sigma })
        }
    }
}

struct Draw<'p> {
    entry: &'p PoolEntry,
    jitter: JitterParams,
    scale: f64,
    blend: Option<BlendParams>,
}

/// Draws `k` from `r_paste`, samples up to `k` instances from the basket
/// images without replacement and prepares each one: crop, color jitter,
/// scale and rotation. Candidates whose transformed size ratio falls below
/// `min_size_ratio` are discarded. `existing_sides` feeds scale-aware sizing.
///
/// All random draws happen before any source image is loaded, so a failed
/// load never shifts the stream.
pub fn select_candidates<R: Rng + ?Sized>(
    rng: &mut R,
    pool: &InstancePool,
    basket: &[u64],
    source: &dyn ImageSource,
    config: &OcpConfig,
    dest: (u32, u32),
    existing_sides: &[f64],
) -> (Vec<PasteCandidate>, Vec<SkippedCandidate>) {
    let [lo, hi] = config.r_paste;
    let k = rng.gen_range(lo..=hi) as usize;
    let available: Vec<&PoolEntry> = basket.iter().flat_map(|&id| pool.entries_of(id)).collect();
    let k = k.min(available.len());
    if k == 0 {
        return (Vec::new(), Vec::new());
    }
    let picked: Vec<usize> = index::sample(rng, available.len(), k).into_vec();
    let draws: Vec<Draw> = picked
        .into_iter()
        .map(|i| {
            let entry = available[i];
            let jitter = sample_jitter(rng, &config.jitter);
            let mut scale = jitter.scale;
            if config.scale_aware.enabled {
                scale *= scale_aware_factor(
                    rng,
                    existing_sides,
                    entry.side * jitter.scale,
                    config.scale_aware.jitter,
                );
            }
            let blend = sample_blend(rng, &config.blend);
            Draw {
                entry,
                jitter,
                scale,
                blend,
            }
        })
        .collect();

    let mut loaded: HashMap<u64, Result<Arc<ImageBuffer>, SourceError>> = HashMap::new();
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for d in draws {
        let e = d.entry;
        let skip = |reason: String| SkippedCandidate {
            source_annotation_id: e.annotation_id,
            source_image_id: e.image_id,
            reason,
        };
        let img = loaded
            .entry(e.image_id)
            .or_insert_with(|| source.load(e.image_id));
        let img = match img {
            Ok(img) => Arc::clone(img),
            Err(err) => {
                log::warn!("{err}");
                skipped.push(skip(err.to_string()));
                continue;
            }
        };
        if img.height() < e.bbox.y + e.bbox.h || img.width() < e.bbox.x + e.bbox.w {
            skipped.push(skip(format!(
                "source image is {}x{}, smaller than the annotation's extent",
                img.width(),
                img.height()
            )));
            continue;
        }
        let mask = e.decode_mask();
        let mut patch = img.crop(e.bbox);
        patch = apply_color_jitter(&patch, &mask, &d.jitter);
        let (patch, mask) = if d.scale == 1.0 && d.jitter.rotation == 0.0 {
            (patch, mask)
        } else {
            match affine_patch(&patch, &mask, d.scale, d.jitter.rotation) {
                Some(pm) => pm,
                None => {
                    skipped.push(skip("mask vanished under scaling".into()));
                    continue;
                }
            }
        };
        let ratio = size_ratio(mask.area(), dest);
        if ratio < config.min_size_ratio {
            skipped.push(skip(format!(
                "size ratio {ratio:.4} below min_size_ratio {}",
                config.min_size_ratio
            )));
            continue;
        }
        out.push(PasteCandidate {
            source_annotation_id: e.annotation_id,
            source_image_id: e.image_id,
            category_id: e.category_id,
            patch,
            mask,
            jitter: d.jitter,
            scale: d.scale,
            blend: d.blend,
        });
    }
    (out, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coco::parse_dataset;
    use crate::jitter::JitterRanges;
    use crate::pool::build_instance_pool;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;

    /// Image `i` holds one `side × side` square at (2, 2).
    fn fixture(sides: &[u32]) -> (InstancePool, MemoryImages) {
        let imgs: Vec<_> = (1..=sides.len())
            .map(|i| json!({"id": i, "file_name": format!("{i}.png"), "height": 40, "width": 40}))
            .collect();
        let anns: Vec<_> = sides
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let (a, b) = (2.0, 2.0 + s as f64);
                json!({"id": i + 1, "image_id": i + 1, "category_id": 1,
                       "segmentation": [[a, a, b, a, b, b, a, b]], "area": s * s, "bbox": [a, a, s, s], "iscrowd": 0})
            })
            .collect();
        let d = parse_dataset(
            &json!({"images": imgs, "annotations": anns,
                                      "categories": [{"id": 1, "name": "person"}]})
            .to_string(),
        )
        .unwrap();
        let images = (1..=sides.len() as u64)
            .map(|i| (i, ImageBuffer::filled(40, 40, [i as u8 * 10, 0, 0])))
            .collect();
        (build_instance_pool(&d, 0.0, &[]), images)
    }

    fn plain() -> OcpConfig {
        OcpConfig {
            jitter: JitterRanges::disabled(),
            min_size_ratio: 0.0,
            ..OcpConfig::default()
        }
    }

    #[test]
    fn count_follows_r_paste() {
        let (pool, images) = fixture(&[5, 6, 7, 8]);
        let config = OcpConfig {
            r_paste: [1, 3],
            ..plain()
        };
        let mut seen = [false; 4];
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c, s) = select_candidates(
                &mut rng,
                &pool,
                &[1, 2, 3, 4],
                &images,
                &config,
                (40, 40),
                &[],
            );
            assert!(s.is_empty());
            assert!((1..=3).contains(&c.len()));
            seen[c.len()] = true;
        }
        assert_eq!(seen, [false, true, true, true]);
    }

    #[test]
    fn zero_range_gives_nothing() {
        let (pool, images) = fixture(&[5]);
        let config = OcpConfig {
            r_paste: [0, 0],
            ..plain()
        };
        let (c, s) = select_candidates(
            &mut ChaCha8Rng::seed_from_u64(0),
            &pool,
            &[1],
            &images,
            &config,
            (40, 40),
            &[],
        );
        assert!(c.is_empty() && s.is_empty());
    }

    #[test]
    fn candidate_is_the_cropped_instance() {
        let (pool, images) = fixture(&[6]);
        let (c, _) = select_candidates(
            &mut ChaCha8Rng::seed_from_u64(0),
            &pool,
            &[1],
            &images,
            &plain(),
            (40, 40),
            &[],
        );
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].mask, BinaryMask::full(6, 6));
        assert_eq!(c[0].patch, ImageBuffer::filled(6, 6, [10, 0, 0]));
        assert_eq!(c[0].source_annotation_id, 1);
    }

    #[test]
    fn small_instances_are_discarded() {
        // 9x9 instance into 640x480: 9 / sqrt(307200) ~ 0.0162 < 0.03
        assert!((size_ratio(81, (480, 640)) - 9.0 / 307200f64.sqrt()).abs() < 1e-15);
        assert!(size_ratio(81, (480, 640)) < 0.03);
        let (pool, images) = fixture(&[9]);
        let config = OcpConfig {
            min_size_ratio: 0.03,
            ..plain()
        };
        let (c, s) = select_candidates(
            &mut ChaCha8Rng::seed_from_u64(0),
            &pool,
            &[1],
            &images,
            &config,
            (480, 640),
            &[],
        );
        assert!(c.is_empty());
        assert_eq!(s.len(), 1);
        assert!(s[0].reason.contains("min_size_ratio"));
    }

    #[test]
    fn missing_source_is_skipped() {
        let (pool, _) = fixture(&[6, 6]);
        let only_two: MemoryImages = [(2, ImageBuffer::filled(40, 40, [1, 2, 3]))]
            .into_iter()
            .collect();
        let config = OcpConfig {
            r_paste: [2, 2],
            ..plain()
        };
        let (c, s) = select_candidates(
            &mut ChaCha8Rng::seed_from_u64(0),
            &pool,
            &[1, 2],
            &only_two,
            &config,
            (40, 40),
            &[],
        );
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].source_image_id, 2);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].source_image_id, 1);
    }

    #[test]
    fn random_blend_kernel_is_odd() {
        let blend = Blend::Random {
            kernel: [2, 9],
            sigma: [0.5, 3.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..500 {
            let b = sample_blend(&mut rng, &blend).unwrap();
            assert!(b.kernel % 2 == 1 && (3..=9).contains(&b.kernel));
            assert!((0.5..=3.0).contains(&b.sigma));
            seen.insert(b.kernel);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![3, 5, 7, 9]);
    }
}
