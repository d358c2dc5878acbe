//! Basket sampling, paste positions and scale-aware sizing.

use rand::seq::index;
use rand::Rng;

use crate::mask::PixelBox;
use crate::pool::InstancePool;

/// Up to `n_basket` distinct pool images, uniformly without replacement,
/// never the base image.
pub fn sample_basket<R: Rng + ?Sized>(
    rng: &mut R,
    pool: &InstancePool,
    n_basket: usize,
    exclude_image: u64,
) -> Vec<u64> {
    let population: Vec<u64> = pool.image_ids().filter(|&id| id != exclude_image).collect();
    let amount = n_basket.min(population.len());
    if amount == 0 {
        return Vec::new();
    }
    index::sample(rng, population.len(), amount)
        .into_iter()
        .map(|i| population[i])
        .collect()
}

/// Top-left corner such that the candidate's center is uniform over the
/// destination pixels. Overhang is allowed and clipped later.
pub fn choose_position_random<R: Rng + ?Sized>(
    rng: &mut R,
    dest: (u32, u32),
    cand: (u32, u32),
) -> (i64, i64) {
    let (dh, dw) = dest;
    let (ch, cw) = cand;
    let cx = rng.gen_range(0..dw) as i64;
    let cy = rng.gen_range(0..dh) as i64;
    (cx - (cw / 2) as i64, cy - (ch / 2) as i64)
}

/// Center drawn uniformly from the bbox of a random existing instance,
/// grown by `expand·w` / `expand·h` on each side and clipped to the image.
/// Without existing instances this is exactly [`choose_position_random`].
pub fn choose_position_targeted<R: Rng + ?Sized>(
    rng: &mut R,
    existing: &[PixelBox],
    cand: (u32, u32),
    dest: (u32, u32),
    expand: f64,
) -> (i64, i64) {
    if existing.is_empty() {
        return choose_position_random(rng, dest, cand);
    }
    let (dh, dw) = dest;
    let (ch, cw) = cand;
    let anchor = existing[rng.gen_range(0..existing.len())];
    let (cx_lo, cx_hi) = locality(anchor.x, anchor.w, expand, dw);
    let (cy_lo, cy_hi) = locality(anchor.y, anchor.h, expand, dh);
    let cx = rng.gen_range(cx_lo..=cx_hi);
    let cy = rng.gen_range(cy_lo..=cy_hi);
    (cx - (cw / 2) as i64, cy - (ch / 2) as i64)
}

/// Integer center range for one axis: `[start − λ·len, start + len + λ·len]`
/// clipped to `[0, extent − 1]`.
fn locality(start: u32, len: u32, expand: f64, extent: u32) -> (i64, i64) {
    let margin = expand * len as f64;
    let lo = (start as f64 - margin).max(0.0).ceil() as i64;
    let hi = ((start + len) as f64 + margin)
        .min((extent - 1) as f64)
        .floor() as i64;
    let lo = lo.min(extent as i64 - 1);
    (lo, hi.max(lo))
}

/// Ratio that brings a candidate of equalized side `cand_side` to a target
/// side drawn from the existing instances' sides times a relative jitter.
/// `1.0` when there is nothing to sample from.
pub fn scale_aware_factor<R: Rng + ?Sized>(
    rng: &mut R,
    existing_sides: &[f64],
    cand_side: f64,
    jitter: [f64; 2],
) -> f64 {
    if existing_sides.is_empty() || cand_side <= 0.0 {
        return 1.0;
    }
    let target = existing_sides[rng.gen_range(0..existing_sides.len())];
    let [lo, hi] = jitter;
    let rel = lo + (hi - lo) * rng.gen::<f64>();
    target * rel / cand_side
}
