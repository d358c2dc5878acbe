//! Soft paste mattes: Gaussian-blurred instance masks.

use crate::error::MaskError;
use crate::mask::BinaryMask;

/// Per-pixel coverage in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMask {
    height: u32,
    width: u32,
    alpha: Vec<f32>,
}

impl AlphaMask {
    pub fn constant(height: u32, width: u32, value: f32) -> Self {
        Self {
            height,
            width,
            alpha: vec![value.clamp(0.0, 1.0); height as usize * width as usize],
        }
    }

    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> f32) -> Self {
        let mut alpha = Vec::with_capacity(height as usize * width as usize);
        for y in 0..height {
            for x in 0..width {
                alpha.push(f(y, x).clamp(0.0, 1.0));
            }
        }
        Self {
            height,
            width,
            alpha,
        }
    }

    /// Hard matte: 1 on the mask, 0 elsewhere.
    pub fn from_mask(m: &BinaryMask) -> Self {
        Self {
            height: m.height(),
            width: m.width(),
            alpha: m.as_bytes().iter().map(|&b| b as f32).collect(),
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, y: u32, x: u32) -> f32 {
        self.alpha[y as usize * self.width as usize + x as usize]
    }

    pub fn values(&self) -> &[f32] {
        &self.alpha
    }
}

/// Normalized 1-D Gaussian taps of length `kernel_size`.
pub fn gaussian_kernel(kernel_size: u32, sigma: f64) -> Result<Vec<f64>, MaskError> {
    if kernel_size == 0 || kernel_size.is_multiple_of(2) {
        return Err(MaskError::KernelSize(kernel_size));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(MaskError::Sigma(sigma));
    }
    let radius = (kernel_size / 2) as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Separable Gaussian blur of the 0/1 mask, zero outside the mask bounds.
pub fn gaussian_alpha(
    m: &BinaryMask,
    kernel_size: u32,
    sigma: f64,
) -> Result<AlphaMask, MaskError> {
    let taps = gaussian_kernel(kernel_size, sigma)?;
    if kernel_size == 1 {
        return Ok(AlphaMask::from_mask(m));
    }
    let (h, w) = (m.height() as usize, m.width() as usize);
    let radius = taps.len() / 2;
    let src = m.as_bytes();

    let mut horizontal = vec![0f64; h * w];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let sx = x as i64 + k as i64 - radius as i64;
                if sx >= 0 && (sx as usize) < w && row[sx as usize] != 0 {
                    acc += t;
                }
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut alpha = vec![0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let sy = y as i64 + k as i64 - radius as i64;
                if sy >= 0 && (sy as usize) < h {
                    acc += t * horizontal[sy as usize * w + x];
                }
            }
            alpha[y * w + x] = acc.clamp(0.0, 1.0) as f32;
        }
    }
    Ok(AlphaMask {
        height: m.height(),
        width: m.width(),
        alpha,
    })
}
