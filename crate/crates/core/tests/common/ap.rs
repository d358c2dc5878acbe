//! Brute-force AP reference and random tiny evaluation cases.

use ocp_core::eval::{EvalImage, GtMask, PredMask};
use ocp_core::mask::BinaryMask;
use rand::Rng;

/// Straightforward reference: direct pixel IoU, greedy matching over the
/// score-sorted list, and the interpolated precision read off as the best
/// precision at any rank reaching each recall level.
pub fn reference_ap(images: &[EvalImage], thresholds: &[f64]) -> f64 {
    let iou = |a: &BinaryMask, b: &BinaryMask| {
        let (mut i, mut u) = (0u64, 0u64);
        for y in 0..a.height() {
            for x in 0..a.width() {
                let (p, q) = (a.get(y, x), b.get(y, x));
                i += (p && q) as u64;
                u += (p || q) as u64;
            }
        }
        if u == 0 {
            0.0
        } else {
            i as f64 / u as f64
        }
    };
    let num_gt: usize = images.iter().map(|im| im.gts.len()).sum();
    let mut sum = 0.0;
    for &t in thresholds {
        let mut ranked: Vec<(f64, usize, usize, bool)> = Vec::new();
        for (ii, im) in images.iter().enumerate() {
            let mut order: Vec<usize> = (0..im.preds.len()).collect();
            order.sort_by(|&a, &b| {
                im.preds[b]
                    .score
                    .partial_cmp(&im.preds[a].score)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut used = vec![false; im.gts.len()];
            for (rank, &p) in order.iter().enumerate() {
                let mut best: Option<usize> = None;
                let mut best_iou = -1.0;
                for (g, &taken) in used.iter().enumerate() {
                    if taken {
                        continue;
                    }
                    let v = iou(&im.preds[p].mask, &im.gts[g].mask);
                    if v < t {
                        continue;
                    }
                    let better =
                        v > best_iou || (v == best_iou && im.gts[g].id < im.gts[best.unwrap()].id);
                    if better {
                        best = Some(g);
                        best_iou = v;
                    }
                }
                if let Some(g) = best {
                    used[g] = true;
                }
                ranked.push((im.preds[p].score, ii, rank, best.is_some()));
            }
        }
        ranked.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut points = Vec::new();
        let mut tp = 0;
        for (k, r) in ranked.iter().enumerate() {
            tp += r.3 as usize;
            points.push((tp as f64 / num_gt as f64, tp as f64 / (k + 1) as f64));
        }
        let mut ap = 0.0;
        for i in 0..=100 {
            let level = if i == 100 { 1.0 } else { i as f64 * 0.01 };
            let best = points
                .iter()
                .filter(|(rc, _)| *rc >= level)
                .map(|(_, pr)| *pr)
                .fold(0.0, f64::max);
            ap += best;
        }
        sum += ap / 101.0;
    }
    sum / thresholds.len() as f64
}

pub fn rect(h: u32, w: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> BinaryMask {
    BinaryMask::from_fn(h, w, |y, x| x >= x0 && x < x1 && y >= y0 && y < y1)
}

pub fn random_rect<R: Rng>(rng: &mut R) -> BinaryMask {
    let x0 = rng.gen_range(0..7);
    let y0 = rng.gen_range(0..7);
    let x1 = rng.gen_range(x0 + 1..=8);
    let y1 = rng.gen_range(y0 + 1..=8);
    rect(8, 8, x0, y0, x1, y1)
}

pub fn random_case<R: Rng>(rng: &mut R) -> Vec<EvalImage> {
    let n_images = rng.gen_range(1..=3);
    let mut next_id = 1;
    (0..n_images)
        .map(|_| {
            let gts: Vec<GtMask> = (0..rng.gen_range(0..=3))
                .map(|_| {
                    next_id += 1;
                    GtMask {
                        id: rng.gen_range(0..3) * 100 + next_id,
                        mask: random_rect(rng),
                    }
                })
                .collect();
            let preds = (0..rng.gen_range(0..=5))
                .map(|_| {
                    // near-copies of a gt half the time
                    let mask = if !gts.is_empty() && rng.gen_bool(0.5) {
                        gts[rng.gen_range(0..gts.len())].mask.clone()
                    } else {
                        random_rect(rng)
                    };
                    let score = [0.25, 0.5, 0.75, 1.0][rng.gen_range(0..4)];
                    PredMask { score, mask }
                })
                .collect();
            EvalImage { gts, preds }
        })
        .collect()
}
