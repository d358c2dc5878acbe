//! Scale/rotate an instance patch and its mask about the patch center.

use crate::image::ImageBuffer;
use crate::mask::BinaryMask;

/// Rotation by `degrees` with `sin`/`cos` snapped to exact values at
/// multiples of 90° so quarter turns stay pixel-exact.
fn rotation(degrees: f64) -> (f64, f64) {
    let rad = degrees.to_radians();
    let snap = |v: f64| {
        if v.abs() < 1e-12 {
            0.0
        } else if (v.abs() - 1.0).abs() < 1e-12 {
            v.signum()
        } else {
            v
        }
    };
    (snap(rad.cos()), snap(rad.sin()))
}

/// Applies `scale` and `rotation` (degrees, counter-clockwise on screen) to
/// the patch and its mask. The image is resampled bilinearly, the mask by
/// nearest neighbour; both share one inverse map. The result is cropped to the
/// bounding box of the transformed mask.
///
/// Returns `None` when the transformed mask is empty.
pub fn affine_patch(
    img: &ImageBuffer,
    m: &BinaryMask,
    scale: f64,
    rotation_deg: f64,
) -> Option<(ImageBuffer, BinaryMask)> {
    assert_eq!(img.dims(), m.dims(), "patch and mask dimensions differ");
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let (h, w) = (m.height() as f64, m.width() as f64);
    let (cos, sin) = rotation(rotation_deg);
    let out_w = (scale * (cos.abs() * w + sin.abs() * h) - 1e-9)
        .ceil()
        .max(1.0);
    let out_h = (scale * (sin.abs() * w + cos.abs() * h) - 1e-9)
        .ceil()
        .max(1.0);
    if out_w * out_h > (1u64 << 32) as f64 {
        return None;
    }
    let (out_w, out_h) = (out_w as u32, out_h as u32);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (ocx, ocy) = (out_w as f64 / 2.0, out_h as f64 / 2.0);

    let mut mask = BinaryMask::new(out_h, out_w);
    let mut patch = ImageBuffer::new(out_h, out_w);
    let inv = 1.0 / scale;
    for v in 0..out_h {
        for u in 0..out_w {
            let dx = (u as f64 + 0.5 - ocx) * inv;
            let dy = (v as f64 + 0.5 - ocy) * inv;
            // inverse rotation
            let px = cx + cos * dx + sin * dy;
            let py = cy - sin * dx + cos * dy;
            if px < 0.0 || py < 0.0 || px >= w || py >= h {
                continue;
            }
            if m.get(py as u32, px as u32) {
                mask.set(v, u, true);
            }
            patch.put_pixel(v, u, bilinear(img, px - 0.5, py - 0.5));
        }
    }
    let bb = mask.bbox()?;
    Some((patch.crop(bb), mask.crop(bb)))
}

/// Bilinear sample at continuous pixel coordinates (pixel centers on integers),
/// clamped at the borders.
fn bilinear(img: &ImageBuffer, x: f64, y: f64) -> [u8; 3] {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (p00, p01, p10, p11) = (
        img.pixel(y0, x0),
        img.pixel(y0, x1),
        img.pixel(y1, x0),
        img.pixel(y1, x1),
    );
    std::array::from_fn(|c| {
        let top = p00[c] as f64 * (1.0 - fx) + p01[c] as f64 * fx;
        let bottom = p10[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
    })
}

/// Tight crop of patch and mask to the mask's bounding box.
pub fn tight_crop(img: &ImageBuffer, m: &BinaryMask) -> Option<(ImageBuffer, BinaryMask)> {
    let bb = m.bbox()?;
    Some((img.crop(bb), m.crop(bb)))
}
