//! 8-bit RGB pixel buffers and alpha compositing.

use crate::blend::AlphaMask;
use crate::error::MaskError;
use crate::mask::{BinaryMask, Overlap, PixelBox};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    height: u32,
    width: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            data: vec![0; height as usize * width as usize * 3],
        }
    }

    pub fn filled(height: u32, width: u32, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height as usize * width as usize * 3);
        for _ in 0..height as usize * width as usize {
            data.extend_from_slice(&rgb);
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_raw(height: u32, width: u32, data: Vec<u8>) -> Result<Self, MaskError> {
        let expected = height as usize * width as usize * 3;
        if data.len() != expected {
            return Err(MaskError::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height as usize * width as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
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

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, y: u32, x: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put_pixel(&mut self, y: u32, x: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn crop(&self, region: PixelBox) -> ImageBuffer {
        let mut data = Vec::with_capacity(region.area() as usize * 3);
        let stride = self.width as usize * 3;
        for y in region.y..region.y + region.h {
            let start = y as usize * stride + region.x as usize * 3;
            data.extend_from_slice(&self.data[start..start + region.w as usize * 3]);
        }
        ImageBuffer {
            height: region.h,
            width: region.w,
            data,
        }
    }
}

/// `alpha·patch + (1 − alpha)·dest` over the overlap, rounded half away from
/// zero per channel. Patch pixels that land outside `dest` are dropped.
pub fn composite(
    dest: &ImageBuffer,
    patch: &ImageBuffer,
    alpha: &AlphaMask,
    position: (i64, i64),
) -> Result<ImageBuffer, MaskError> {
    let mut out = dest.clone();
    composite_into(&mut out, patch, alpha, position)?;
    Ok(out)
}

pub fn composite_into(
    dest: &mut ImageBuffer,
    patch: &ImageBuffer,
    alpha: &AlphaMask,
    (x, y): (i64, i64),
) -> Result<(), MaskError> {
    if patch.dims() != alpha.dims() {
        return Err(MaskError::DimensionMismatch {
            left: patch.dims(),
            right: alpha.dims(),
        });
    }
    let Some(ov) = Overlap::compute(patch.width, patch.height, dest.width, dest.height, x, y)
    else {
        return Ok(());
    };
    for row in 0..ov.h {
        let (sy, dy) = (ov.src_y + row, ov.dst_y + row);
        for col in 0..ov.w {
            let (sx, dx) = (ov.src_x + col, ov.dst_x + col);
            let a = alpha.get(sy, sx);
            if a <= 0.0 {
                continue;
            }
            let src = patch.pixel(sy, sx);
            if a >= 1.0 {
                dest.put_pixel(dy, dx, src);
                continue;
            }
            let dst = dest.pixel(dy, dx);
            let blended = std::array::from_fn(|c| blend_channel(src[c], dst[c], a));
            dest.put_pixel(dy, dx, blended);
        }
    }
    Ok(())
}

#[inline]
fn blend_channel(src: u8, dst: u8, alpha: f32) -> u8 {
    // f32::round is half-away-from-zero
    (alpha * src as f32 + (1.0 - alpha) * dst as f32)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Hard paste: copies patch pixels wherever `mask` is set.
pub fn paste_masked(
    dest: &mut ImageBuffer,
    patch: &ImageBuffer,
    mask: &BinaryMask,
    (x, y): (i64, i64),
) {
    let Some(ov) = Overlap::compute(patch.width, patch.height, dest.width, dest.height, x, y)
    else {
        return;
    };
    for row in 0..ov.h {
        let mrow = mask.row(ov.src_y + row);
        for col in 0..ov.w {
            if mrow[(ov.src_x + col) as usize] != 0 {
                let px = patch.pixel(ov.src_y + row, ov.src_x + col);
                dest.put_pixel(ov.dst_y + row, ov.dst_x + col, px);
            }
        }
    }
}
