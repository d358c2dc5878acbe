//! Occlusion-aware ground-truth rewriting.

use serde::{Deserialize, Serialize};

use crate::coco::InstanceAnnotation;
use crate::mask::BinaryMask;

/// An annotation together with its working mask in destination coordinates.
#[derive(Debug, Clone)]
pub struct MaskedAnnotation {
    pub annotation: InstanceAnnotation,
    pub mask: BinaryMask,
    /// Area when the augmentation started (or when pasted); the denominator
    /// of the visible fraction.
    pub reference_area: u64,
    /// Set once any pixel has been removed.
    pub changed: bool,
    pub pasted: bool,
}

impl MaskedAnnotation {
    pub fn new(annotation: InstanceAnnotation, mask: BinaryMask) -> Self {
        let reference_area = mask.area();
        Self {
            annotation,
            mask,
            reference_area,
            changed: false,
            pasted: false,
        }
    }

    pub fn visible_fraction(&self) -> f64 {
        if self.reference_area == 0 {
            return 0.0;
        }
        self.mask.area() as f64 / self.reference_area as f64
    }

    /// Rewrites `area` and `bbox` from the current mask.
    pub fn refresh_fields(&mut self) {
        self.annotation.area = self.mask.area() as f64;
        self.annotation.bbox = self.mask.bbox().map(|b| b.to_xywh()).unwrap_or([0.0; 4]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub threshold: f64,
    pub min_visible_px: u64,
}

impl Visibility {
    pub fn passes(&self, remaining: u64, reference: u64) -> bool {
        reference > 0
            && remaining >= self.min_visible_px
            && remaining as f64 / reference as f64 >= self.threshold
    }
}

/// Removes `pasted` from every mask it overlaps, refreshes `area`/`bbox` of
/// the overlapped annotations and drops those left below the visibility
/// floor. Annotations the paste does not touch are left alone. Returns the
/// removed annotation ids in list order.
pub fn update_ground_truth(
    annotations: &mut Vec<MaskedAnnotation>,
    pasted: &BinaryMask,
    visibility: Visibility,
) -> Vec<u64> {
    let mut removed = Vec::new();
    annotations.retain_mut(|ann| {
        let cleared = ann
            .mask
            .subtract_assign(pasted)
            .expect("all working masks share the destination dimensions");
        if cleared == 0 {
            return true;
        }
        ann.changed = true;
        if !visibility.passes(ann.mask.area(), ann.reference_area) {
            removed.push(ann.annotation.id);
            return false;
        }
        ann.refresh_fields();
        true
    });
    removed
}
