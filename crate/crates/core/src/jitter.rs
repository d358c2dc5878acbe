//! Per-instance appearance and geometry jitter for paste candidates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::image::ImageBuffer;
use crate::mask::BinaryMask;
use crate::transform::affine_patch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterParams {
    pub saturation: f64,
    pub contrast: f64,
    pub brightness: f64,
    pub sharpness: f64,
    pub scale: f64,
    pub rotation: f64,
}

impl JitterParams {
    pub const IDENTITY: JitterParams = JitterParams {
        saturation: 1.0,
        contrast: 1.0,
        brightness: 1.0,
        sharpness: 1.0,
        scale: 1.0,
        rotation: 0.0,
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    fn has_color(&self) -> bool {
        self.saturation != 1.0
            || self.contrast != 1.0
            || self.brightness != 1.0
            || self.sharpness != 1.0
    }
}

impl Default for JitterParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Closed interval plus the probability that the parameter is jittered at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterRange {
    pub range: [f64; 2],
    pub p: f64,
}

impl JitterRange {
    pub const fn new(lo: f64, hi: f64, p: f64) -> Self {
        Self { range: [lo, hi], p }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, identity: f64) -> f64 {
        if rng.gen::<f64>() < self.p {
            let [lo, hi] = self.range;
            lo + (hi - lo) * rng.gen::<f64>()
        } else {
            identity
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterRanges {
    pub saturation: JitterRange,
    pub contrast: JitterRange,
    pub brightness: JitterRange,
    pub sharpness: JitterRange,
    pub scale: JitterRange,
    pub rotation: JitterRange,
}

impl Default for JitterRanges {
    fn default() -> Self {
        let color = JitterRange::new(0.7, 1.3, 0.5);
        Self {
            saturation: color,
            contrast: color,
            brightness: color,
            sharpness: color,
            scale: JitterRange::new(0.7, 1.3, 0.5),
            rotation: JitterRange::new(-15.0, 15.0, 0.3),
        }
    }
}

impl JitterRanges {
    /// Every probability zero: sampling always yields identity params.
    pub fn disabled() -> Self {
        let off = |r: JitterRange| JitterRange { p: 0.0, ..r };
        let d = Self::default();
        Self {
            saturation: off(d.saturation),
            contrast: off(d.contrast),
            brightness: off(d.brightness),
            sharpness: off(d.sharpness),
            scale: off(d.scale),
            rotation: off(d.rotation),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let named = [
            ("saturation", self.saturation),
            ("contrast", self.contrast),
            ("brightness", self.brightness),
            ("sharpness", self.sharpness),
            ("scale", self.scale),
            ("rotation", self.rotation),
        ];
        for (name, r) in named {
            let [lo, hi] = r.range;
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(ConfigError(format!(
                    "jitter.{name}.range must satisfy lo <= hi, got [{lo}, {hi}]"
                )));
            }
            if !(0.0..=1.0).contains(&r.p) {
                return Err(ConfigError(format!(
                    "jitter.{name}.p must be in [0, 1], got {}",
                    r.p
                )));
            }
            if name == "rotation" {
                if lo < -180.0 || hi > 180.0 {
                    return Err(ConfigError(format!(
                        "jitter.rotation.range must lie within [-180, 180], got [{lo}, {hi}]"
                    )));
                }
            } else if lo <= 0.0 {
                return Err(ConfigError(format!(
                    "jitter.{name}.range must be positive, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Draws each parameter independently, in field order.
pub fn sample_jitter<R: Rng + ?Sized>(rng: &mut R, ranges: &JitterRanges) -> JitterParams {
    JitterParams {
        saturation: ranges.saturation.sample(rng, 1.0),
        contrast: ranges.contrast.sample(rng, 1.0),
        brightness: ranges.brightness.sample(rng, 1.0),
        sharpness: ranges.sharpness.sample(rng, 1.0),
        scale: ranges.scale.sample(rng, 1.0),
        rotation: ranges.rotation.sample(rng, 0.0),
    }
}

#[inline]
fn luma(p: [f32; 3]) -> f32 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

/// Brightness, contrast, saturation, then sharpness. Contrast pivots on the
/// mean luma of the masked pixels only. Values are carried in float between
/// stages and rounded once at the end.
pub fn apply_color_jitter(
    patch: &ImageBuffer,
    mask: &BinaryMask,
    params: &JitterParams,
) -> ImageBuffer {
    assert_eq!(
        patch.dims(),
        mask.dims(),
        "patch and mask dimensions differ"
    );
    if !params.has_color() {
        return patch.clone();
    }
    let (h, w) = patch.dims();
    let mut px: Vec<[f32; 3]> = patch
        .as_raw()
        .chunks_exact(3)
        .map(|c| [c[0] as f32, c[1] as f32, c[2] as f32])
        .collect();

    if params.brightness != 1.0 {
        let f = params.brightness as f32;
        for p in &mut px {
            *p = p.map(|c| c * f);
        }
    }
    if params.contrast != 1.0 {
        let (sum, n) = px
            .iter()
            .zip(mask.as_bytes())
            .filter(|(_, &m)| m != 0)
            .fold((0f64, 0usize), |(s, n), (p, _)| {
                (s + luma(*p) as f64, n + 1)
            });
        let mean = if n == 0 { 0.0 } else { (sum / n as f64) as f32 };
        let f = params.contrast as f32;
        for p in &mut px {
            *p = p.map(|c| mean + f * (c - mean));
        }
    }
    if params.saturation != 1.0 {
        let f = params.saturation as f32;
        for p in &mut px {
            let l = luma(*p);
            *p = p.map(|c| l + f * (c - l));
        }
    }
    if params.sharpness != 1.0 && h >= 3 && w >= 3 {
        let smooth = smooth3x3(&px, h as usize, w as usize);
        let f = params.sharpness as f32;
        for (p, s) in px.iter_mut().zip(&smooth) {
            *p = std::array::from_fn(|c| s[c] + f * (p[c] - s[c]));
        }
    }

    let data = px
        .iter()
        .flat_map(|p| p.map(|c| c.round().clamp(0.0, 255.0) as u8))
        .collect();
    ImageBuffer::from_raw(h, w, data).expect("same dimensions as input")
}

/// `[[1,1,1],[1,5,1],[1,1,1]] / 13` smoothing; border pixels are left as-is.
fn smooth3x3(px: &[[f32; 3]], h: usize, w: usize) -> Vec<[f32; 3]> {
    let mut out = px.to_vec();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut acc = [0f32; 3];
            for dy in 0..3 {
                for dx in 0..3 {
                    let weight = if dy == 1 && dx == 1 { 5.0 } else { 1.0 };
                    let p = px[(y + dy - 1) * w + x + dx - 1];
                    for c in 0..3 {
                        acc[c] += weight * p[c];
                    }
                }
            }
            out[y * w + x] = acc.map(|a| a / 13.0);
        }
    }
    out
}

/// Scales and rotates patch and mask together; `None` if the mask vanishes.
pub fn apply_geometric_jitter(
    patch: &ImageBuffer,
    mask: &BinaryMask,
    params: &JitterParams,
) -> Option<(ImageBuffer, BinaryMask)> {
    affine_patch(patch, mask, params.scale, params.rotation)
}
