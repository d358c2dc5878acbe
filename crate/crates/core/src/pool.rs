//! Flat index of paste-eligible instances, grouped by source image.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coco::Dataset;
use crate::mask::{BinaryMask, PixelBox};
use crate::rle::{rle_decode, rle_encode, RleMask};

/// Eligibility rule recorded with the pool it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eligibility {
    /// Minimum equalized side length `√area`, in pixels.
    pub min_side_px: f64,
    /// Empty means every category is eligible.
    pub category_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub annotation_id: u64,
    pub image_id: u64,
    pub category_id: u64,
    /// `√(rasterized mask area)`.
    pub side: f64,
    /// Where the cropped mask sits in the source image.
    pub bbox: PixelBox,
    /// Mask cropped to `bbox`, kept run-length encoded.
    pub mask: RleMask,
}

impl PoolEntry {
    pub fn decode_mask(&self) -> BinaryMask {
        rle_decode(&self.mask).expect("pool masks are encoded by the pool itself")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstancePool {
    entries: Vec<PoolEntry>,
    /// image id -> entry positions, ascending image id.
    by_image: BTreeMap<u64, Vec<usize>>,
    eligibility: Eligibility,
}

impl InstancePool {
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eligibility(&self) -> &Eligibility {
        &self.eligibility
    }

    /// Image ids owning at least one entry, ascending.
    pub fn image_ids(&self) -> impl ExactSizeIterator<Item = u64> + '_ {
        self.by_image.keys().copied()
    }

    pub fn entries_of(&self, image_id: u64) -> impl Iterator<Item = &PoolEntry> {
        self.by_image
            .get(&image_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }
}

/// Collects every annotation with a present segmentation, `iscrowd = 0`, a
/// category in `category_ids` (all categories when empty) and
/// `√(rasterized area) >= min_side_px`. Areas are always recomputed from the
/// mask; the stored `area` field is ignored.
pub fn build_instance_pool(d: &Dataset, min_side_px: f64, category_ids: &[u64]) -> InstancePool {
    let index = d.index();
    let mut entries = Vec::new();
    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for a in &d.annotations {
        if a.is_crowd() || !a.has_mask() {
            continue;
        }
        if !category_ids.is_empty() && !category_ids.contains(&a.category_id) {
            continue;
        }
        let Some(im) = index.image(d, a.image_id) else {
            continue;
        };
        let Some(seg) = &a.segmentation else {
            continue;
        };
        let mask = match seg.to_mask(im.height, im.width) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("annotation {} skipped for pool: {e}", a.id);
                continue;
            }
        };
        let Some(bbox) = mask.bbox() else {
            continue;
        };
        let side = (mask.area() as f64).sqrt();
        if side < min_side_px {
            continue;
        }
        by_image.entry(a.image_id).or_default().push(entries.len());
        entries.push(PoolEntry {
            annotation_id: a.id,
            image_id: a.image_id,
            category_id: a.category_id,
            side,
            bbox,
            mask: rle_encode(&mask.crop(bbox)),
        });
    }
    InstancePool {
        entries,
        by_image,
        eligibility: Eligibility {
            min_side_px,
            category_ids: category_ids.to_vec(),
        },
    }
}
