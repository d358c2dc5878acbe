//! COCO run-length encoding.
//!
//! Runs are taken in column-major order and alternate background/foreground,
//! always starting with a (possibly empty) background run. The compact ASCII
//! `counts` string used in COCO JSON is only produced at the serialization
//! boundary by [`RleMask::to_compressed`] / [`RleMask::from_compressed`].

use crate::error::MaskError;
use crate::mask::BinaryMask;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RleMask {
    pub height: u32,
    pub width: u32,
    pub counts: Vec<u32>,
}

impl RleMask {
    pub fn new(height: u32, width: u32, counts: Vec<u32>) -> Result<Self, MaskError> {
        let rle = Self {
            height,
            width,
            counts,
        };
        rle.check_sum()?;
        Ok(rle)
    }

    fn check_sum(&self) -> Result<(), MaskError> {
        let sum: u64 = self.counts.iter().map(|&c| c as u64).sum();
        let expected = self.height as u64 * self.width as u64;
        if sum != expected {
            return Err(MaskError::RleCountSum {
                sum,
                expected,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    /// Foreground pixel count, read straight off the odd runs.
    pub fn area(&self) -> u64 {
        self.counts
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&c| c as u64)
            .sum()
    }

    /// COCO compressed counts string (LEB128-like, 5 bits per char, offset 48,
    /// runs after the second stored as deltas against the run two back).
    pub fn to_compressed(&self) -> String {
        let mut out = String::new();
        for (i, &count) in self.counts.iter().enumerate() {
            let mut x = count as i64;
            if i > 2 {
                x -= self.counts[i - 2] as i64;
            }
            loop {
                let mut c = x & 0x1f;
                x >>= 5;
                let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                out.push((c as u8 + 48) as char);
                if !more {
                    break;
                }
            }
        }
        out
    }

    pub fn from_compressed(height: u32, width: u32, s: &str) -> Result<Self, MaskError> {
        let bytes = s.as_bytes();
        let mut counts: Vec<u32> = Vec::new();
        let mut p = 0;
        while p < bytes.len() {
            let start = p;
            let mut x: i64 = 0;
            let mut k = 0;
            loop {
                let Some(&b) = bytes.get(p) else {
                    return Err(MaskError::RleString { offset: start });
                };
                if !(48..48 + 64).contains(&b) || k > 12 {
                    return Err(MaskError::RleString { offset: p });
                }
                let c = (b - 48) as i64;
                x |= (c & 0x1f) << (5 * k);
                p += 1;
                k += 1;
                if c & 0x20 == 0 {
                    if c & 0x10 != 0 {
                        x |= -1i64 << (5 * k);
                    }
                    break;
                }
            }
            let m = counts.len();
            if m > 2 {
                x += counts[m - 2] as i64;
            }
            let run = u32::try_from(x).map_err(|_| MaskError::RleString { offset: start })?;
            counts.push(run);
        }
        RleMask::new(height, width, counts)
    }
}

pub fn rle_encode(m: &BinaryMask) -> RleMask {
    let (h, w) = m.dims();
    let bytes = m.as_bytes();
    let mut counts = Vec::new();
    let mut current = 0u8;
    let mut run = 0u32;
    for x in 0..w as usize {
        for y in 0..h as usize {
            let v = bytes[y * w as usize + x];
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        height: h,
        width: w,
        counts,
    }
}

pub fn rle_decode(r: &RleMask) -> Result<BinaryMask, MaskError> {
    r.check_sum()?;
    let (h, w) = (r.height as usize, r.width as usize);
    let mut bytes = vec![0u8; h * w];
    let mut pos = 0usize;
    for (i, &run) in r.counts.iter().enumerate() {
        if i % 2 == 1 {
            for k in pos..pos + run as usize {
                // column-major index k -> (row k % h, col k / h)
                bytes[(k % h) * w + k / h] = 1;
            }
        }
        pos += run as usize;
    }
    BinaryMask::from_bytes(r.height, r.width, &bytes)
}
