//! Binary instance masks and the set algebra used for ground-truth rewriting.

use serde::{Deserialize, Serialize};

use crate::error::MaskError;

/// Axis-aligned pixel box, `x`/`y` top-left, half-open extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelBox {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// COCO `[x, y, w, h]` form.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x as f64, self.y as f64, self.w as f64, self.h as f64]
    }
}

/// Row-major binary mask. One byte per pixel; values are always 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: u32,
    width: u32,
    bits: Vec<u8>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("height", &self.height)
            .field("width", &self.width)
            .field("area", &self.area())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            bits: vec![0; height as usize * width as usize],
        }
    }

    pub fn full(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            bits: vec![1; height as usize * width as usize],
        }
    }

    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height as usize * width as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x) as u8);
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    /// Builds a mask from row-major bytes; any non-zero byte is foreground.
    pub fn from_bytes(height: u32, width: u32, bytes: &[u8]) -> Result<Self, MaskError> {
        let expected = height as usize * width as usize;
        if bytes.len() != expected {
            return Err(MaskError::BufferLength {
                expected,
                actual: bytes.len(),
            });
        }
        Ok(Self {
            height,
            width,
            bits: bytes.iter().map(|&b| (b != 0) as u8).collect(),
        })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    /// Row-major 0/1 bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: u32, x: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, y: u32, x: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value as u8;
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.bits[y as usize * w..(y as usize + 1) * w]
    }

    pub(crate) fn row_mut(&mut self, y: u32) -> &mut [u8] {
        let w = self.width as usize;
        &mut self.bits[y as usize * w..(y as usize + 1) * w]
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Tight bounds of the foreground, `None` for an empty mask.
    pub fn bbox(&self) -> Option<PixelBox> {
        let mut min_x = u32::MAX;
        let mut min_y = u32::MAX;
        let mut max_x = 0;
        let mut max_y = 0;
        for y in 0..self.height {
            let row = self.row(y);
            let Some(first) = row.iter().position(|&b| b != 0) else {
                continue;
            };
            let last = row.iter().rposition(|&b| b != 0).unwrap_or(first);
            min_y = min_y.min(y);
            max_y = y;
            min_x = min_x.min(first as u32);
            max_x = max_x.max(last as u32);
        }
        (min_y != u32::MAX).then(|| PixelBox {
            x: min_x,
            y: min_y,
            w: max_x - min_x + 1,
            h: max_y - min_y + 1,
        })
    }

    /// Copies the `region` window out of this mask.
    pub fn crop(&self, region: PixelBox) -> BinaryMask {
        let mut out = BinaryMask::new(region.h, region.w);
        for y in 0..region.h {
            let src = &self.row(region.y + y)[region.x as usize..(region.x + region.w) as usize];
            out.row_mut(y).copy_from_slice(src);
        }
        out
    }

    /// Places `self` with its top-left at `(x, y)` on an empty `height`×`width`
    /// canvas. Pixels falling outside the canvas are dropped.
    pub fn place_on_canvas(&self, height: u32, width: u32, x: i64, y: i64) -> BinaryMask {
        let mut out = BinaryMask::new(height, width);
        let Some(ov) = Overlap::compute(self.width, self.height, width, height, x, y) else {
            return out;
        };
        for row in 0..ov.h {
            let src_row = self.row(ov.src_y + row);
            let dst_row = out.row_mut(ov.dst_y + row);
            dst_row[ov.dst_x as usize..(ov.dst_x + ov.w) as usize]
                .copy_from_slice(&src_row[ov.src_x as usize..(ov.src_x + ov.w) as usize]);
        }
        out
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.dims() != other.dims() {
            return Err(MaskError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Pixel count of `self ∩ other`.
    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64, MaskError> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| (a & b) as u64)
            .sum())
    }

    /// In-place `self ∧ ¬other`; returns how many pixels were cleared.
    pub fn subtract_assign(&mut self, other: &BinaryMask) -> Result<u64, MaskError> {
        self.check_dims(other)?;
        let mut cleared = 0;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            cleared += (*a & b) as u64;
            *a &= b ^ 1;
        }
        Ok(cleared)
    }

    pub fn union_assign(&mut self, other: &BinaryMask) -> Result<(), MaskError> {
        self.check_dims(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }
}

/// `a ∧ ¬b`, per pixel.
pub fn mask_subtract(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, MaskError> {
    let mut out = a.clone();
    out.subtract_assign(b)?;
    Ok(out)
}

/// Intersection over union. Two empty masks have IoU 0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MaskError> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn mask_bbox(m: &BinaryMask) -> Option<PixelBox> {
    m.bbox()
}

/// Overlap of a `src_w`×`src_h` block placed at `(x, y)` on a
/// `dst_w`×`dst_h` canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Overlap {
    pub src_x: u32,
    pub src_y: u32,
    pub dst_x: u32,
    pub dst_y: u32,
    pub w: u32,
    pub h: u32,
}

impl Overlap {
    pub fn compute(src_w: u32, src_h: u32, dst_w: u32, dst_h: u32, x: i64, y: i64) -> Option<Self> {
        let x0 = x.max(0);
        let y0 = y.max(0);
        let x1 = (x + src_w as i64).min(dst_w as i64);
        let y1 = (y + src_h as i64).min(dst_h as i64);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(Self {
            src_x: (x0 - x) as u32,
            src_y: (y0 - y) as u32,
            dst_x: x0 as u32,
            dst_y: y0 as u32,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }
}
