//! Polygon ground truth and its scanline rasterizer.
//!
//! Fill rule is even-odd, sampled at pixel centers `(x + 0.5, y + 0.5)`,
//! with half-open crossings so that a square spanning `[0, 4)` covers
//! exactly 4×4 pixels. Multiple polygons are unioned.

use crate::error::MaskError;
use crate::mask::BinaryMask;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolygonSet {
    pub polygons: Vec<Vec<(f64, f64)>>,
}

impl PolygonSet {
    pub fn new(polygons: Vec<Vec<(f64, f64)>>) -> Self {
        Self { polygons }
    }

    /// From COCO flat `[x0, y0, x1, y1, ...]` lists.
    pub fn from_flat(flat: &[Vec<f64>]) -> Result<Self, MaskError> {
        let mut polygons = Vec::with_capacity(flat.len());
        for (index, coords) in flat.iter().enumerate() {
            if coords.len() % 2 != 0 {
                return Err(MaskError::OddCoordinates {
                    index,
                    len: coords.len(),
                });
            }
            polygons.push(coords.chunks_exact(2).map(|c| (c[0], c[1])).collect());
        }
        let set = Self { polygons };
        set.validate()?;
        Ok(set)
    }

    pub fn to_flat(&self) -> Vec<Vec<f64>> {
        self.polygons
            .iter()
            .map(|p| p.iter().flat_map(|&(x, y)| [x, y]).collect())
            .collect()
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        for (index, poly) in self.polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(MaskError::DegeneratePolygon {
                    index,
                    vertices: poly.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn polygons_to_mask(p: &PolygonSet, height: u32, width: u32) -> Result<BinaryMask, MaskError> {
    p.validate()?;
    let mut mask = BinaryMask::new(height, width);
    let mut crossings: Vec<f64> = Vec::new();
    for poly in &p.polygons {
        let (min_y, max_y) = poly
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
                (lo.min(y), hi.max(y))
            });
        // rows whose center can fall inside [min_y, max_y)
        let row_start = ((min_y - 0.5).ceil().max(0.0)) as i64;
        let row_end = ((max_y - 0.5).ceil().min(height as f64)) as i64;
        for row in row_start..row_end {
            let cy = row as f64 + 0.5;
            crossings.clear();
            for i in 0..poly.len() {
                let (x0, y0) = poly[i];
                let (x1, y1) = poly[(i + 1) % poly.len()];
                if (y0 > cy) != (y1 > cy) {
                    crossings.push(x0 + (cy - y0) * (x1 - x0) / (y1 - y0));
                }
            }
            crossings.sort_by(|a, b| a.total_cmp(b));
            let out_row = mask.row_mut(row as u32);
            for span in crossings.chunks_exact(2) {
                // centers with xa <= x + 0.5 < xb
                let first = (span[0] - 0.5).ceil().max(0.0);
                let end = (span[1] - 0.5).ceil().min(width as f64);
                if end <= first {
                    continue;
                }
                // even-odd within a polygon, union across polygons
                for px in &mut out_row[first as usize..end as usize] {
                    *px |= 1;
                }
            }
        }
    }
    Ok(mask)
}

/// Signed-area (shoelace) total over all loops, absolute per loop.
pub fn polygon_area(p: &PolygonSet) -> f64 {
    p.polygons
        .iter()
        .map(|poly| {
            let n = poly.len();
            let twice: f64 = (0..n)
                .map(|i| {
                    let (x0, y0) = poly[i];
                    let (x1, y1) = poly[(i + 1) % n];
                    x0 * y1 - x1 * y0
                })
                .sum();
            twice.abs() / 2.0
        })
        .sum()
}
