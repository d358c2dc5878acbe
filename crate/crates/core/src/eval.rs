//! Mask average precision and occlusion statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coco::{json_error, Dataset, Segmentation};
use crate::error::CocoError;
use crate::mask::{mask_iou, BinaryMask};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// One entry of a COCO results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInstance {
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    pub score: f64,
}

pub fn parse_predictions(raw: &str) -> Result<Vec<PredictionInstance>, CocoError> {
    let preds: Vec<PredictionInstance> =
        serde_json::from_str(raw).map_err(|e| json_error(raw, &e))?;
    for (i, p) in preds.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.score) {
            return Err(CocoError::Validation(format!(
                "prediction {i} has score {} outside [0, 1]",
                p.score
            )));
        }
    }
    Ok(preds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtMask {
    pub id: u64,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredMask {
    pub score: f64,
    pub mask: BinaryMask,
}

/// Predictions and ground truths of one image and one category.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalImage {
    pub gts: Vec<GtMask>,
    pub preds: Vec<PredMask>,
}

/// Result of [`match_instances`]; indices refer to the caller's slices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// Prediction indices in descending score order (stable).
    pub order: Vec<usize>,
    /// Matched ground-truth index per prediction index.
    pub pred_to_gt: Vec<Option<usize>>,
}

/// Greedy one-to-one matching: predictions in descending score order each
/// take the unmatched ground truth of highest IoU `>= iou_threshold`, ties
/// going to the lower ground-truth id.
pub fn match_instances(preds: &[PredMask], gts: &[GtMask], iou_threshold: f64) -> Matching {
    let ious: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| mask_iou(&p.mask, &g.mask).unwrap_or(0.0))
                .collect()
        })
        .collect();
    match_with_ious(preds, gts, &ious, iou_threshold)
}

fn score_order(preds: &[PredMask]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));
    order
}

fn match_with_ious(preds: &[PredMask], gts: &[GtMask], ious: &[Vec<f64>], thr: f64) -> Matching {
    let order = score_order(preds);
    let mut gt_order: Vec<usize> = (0..gts.len()).collect();
    gt_order.sort_by_key(|&g| gts[g].id);
    let mut taken = vec![false; gts.len()];
    let mut pred_to_gt = vec![None; preds.len()];
    for &p in &order {
        let mut best: Option<(usize, f64)> = None;
        for &g in &gt_order {
            let iou = ious[p][g];
            if taken[g] || iou < thr {
                continue;
            }
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            pred_to_gt[p] = Some(g);
        }
    }
    Matching { order, pred_to_gt }
}

/// How precision is summarized along recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Envelope sampled at recall 0.00, 0.01, ..., 1.00.
    #[default]
    Coco101,
    /// Exact area under the precision envelope.
    AllPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAp {
    pub iou_threshold: f64,
    pub ap: f64,
    /// Raw (uninterpolated) curve in score order.
    pub pr_curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean of `per_threshold` APs.
    pub ap: f64,
    pub per_threshold: Vec<ThresholdAp>,
    pub num_gt: usize,
    pub num_predictions: usize,
    pub interpolation: Interpolation,
}

/// COCO-style AP over images of a single category.
pub fn average_precision(images: &[EvalImage], thresholds: &[f64]) -> EvalResult {
    average_precision_with(images, thresholds, Interpolation::Coco101)
}

pub fn average_precision_with(
    images: &[EvalImage],
    thresholds: &[f64],
    interpolation: Interpolation,
) -> EvalResult {
    let ious: Vec<Vec<Vec<f64>>> = images
        .iter()
        .map(|im| {
            im.preds
                .iter()
                .map(|p| {
                    im.gts
                        .iter()
                        .map(|g| mask_iou(&p.mask, &g.mask).unwrap_or(0.0))
                        .collect()
                })
                .collect()
        })
        .collect();
    let num_gt: usize = images.iter().map(|im| im.gts.len()).sum();
    let num_predictions: usize = images.iter().map(|im| im.preds.len()).sum();
    let per_threshold: Vec<ThresholdAp> = thresholds
        .iter()
        .map(|&thr| {
            // (score, is_tp) in image order, then per-image score order
            let mut dets: Vec<(f64, bool)> = Vec::with_capacity(num_predictions);
            for (im, iou) in images.iter().zip(&ious) {
                let m = match_with_ious(&im.preds, &im.gts, iou, thr);
                dets.extend(
                    m.order
                        .iter()
                        .map(|&p| (im.preds[p].score, m.pred_to_gt[p].is_some())),
                );
            }
            dets.sort_by(|a, b| b.0.total_cmp(&a.0));
            let pr_curve = pr_curve(&dets, num_gt);
            let ap = match interpolation {
                Interpolation::Coco101 => interpolated_101(&pr_curve),
                Interpolation::AllPoints => all_points(&pr_curve),
            };
            ThresholdAp {
                iou_threshold: thr,
                ap,
                pr_curve,
            }
        })
        .collect();
    let ap = if per_threshold.is_empty() {
        0.0
    } else {
        per_threshold.iter().map(|t| t.ap).sum::<f64>() / per_threshold.len() as f64
    };
    EvalResult {
        ap,
        per_threshold,
        num_gt,
        num_predictions,
        interpolation,
    }
}

fn pr_curve(dets: &[(f64, bool)], num_gt: usize) -> Vec<PrPoint> {
    let (mut tp, mut fp) = (0usize, 0usize);
    dets.iter()
        .map(|&(_, is_tp)| {
            if is_tp {
                tp += 1;
            } else {
                fp += 1;
            }
            PrPoint {
                recall: if num_gt == 0 {
                    0.0
                } else {
                    tp as f64 / num_gt as f64
                },
                precision: tp as f64 / (tp + fp) as f64,
            }
        })
        .collect()
}

fn envelope(curve: &[PrPoint]) -> Vec<f64> {
    let mut env: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (1..env.len()).rev() {
        env[i - 1] = env[i - 1].max(env[i]);
    }
    env
}

fn interpolated_101(curve: &[PrPoint]) -> f64 {
    let env = envelope(curve);
    let recalls: Vec<f64> = curve.iter().map(|p| p.recall).collect();
    let mut sum = 0.0;
    for i in 0..=100 {
        // same grid as numpy.linspace(0, 1, 101)
        let r = if i == 100 { 1.0 } else { i as f64 * 0.01 };
        let idx = recalls.partition_point(|&x| x < r);
        if idx < env.len() {
            sum += env[idx];
        }
    }
    sum / 101.0
}

fn all_points(curve: &[PrPoint]) -> f64 {
    let env = envelope(curve);
    let mut prev = 0.0;
    let mut area = 0.0;
    for (p, e) in curve.iter().zip(env) {
        area += (p.recall - prev) * e;
        prev = p.recall;
    }
    area
}

/// Groups a dataset and its predictions per category and image. Crowd
/// ground truths are dropped. Categories without ground truth are skipped.
pub fn eval_images(
    gt: &Dataset,
    preds: &[PredictionInstance],
) -> Result<BTreeMap<u64, Vec<EvalImage>>, CocoError> {
    let index = gt.index();
    let mut by_cat: BTreeMap<u64, BTreeMap<u64, EvalImage>> = BTreeMap::new();
    for a in &gt.annotations {
        if a.is_crowd() {
            continue;
        }
        let Some(seg) = &a.segmentation else { continue };
        let im = index.image(gt, a.image_id).ok_or_else(|| {
            CocoError::Validation(format!(
                "annotation {} refers to unknown image {}",
                a.id, a.image_id
            ))
        })?;
        let mask = seg
            .to_mask(im.height, im.width)
            .map_err(|source| CocoError::Segmentation {
                annotation_id: a.id,
                source,
            })?;
        by_cat
            .entry(a.category_id)
            .or_default()
            .entry(a.image_id)
            .or_default()
            .gts
            .push(GtMask { id: a.id, mask });
    }
    for (i, p) in preds.iter().enumerate() {
        let Some(images) = by_cat.get_mut(&p.category_id) else {
            continue;
        };
        let im = index.image(gt, p.image_id).ok_or_else(|| {
            CocoError::Validation(format!(
                "prediction {i} refers to unknown image {}",
                p.image_id
            ))
        })?;
        if let Segmentation::Rle(r) = &p.segmentation {
            if (r.height, r.width) != (im.height, im.width) {
                return Err(CocoError::Validation(format!(
                    "prediction {i}: mask size {}x{} does not match image {} ({}x{})",
                    r.height, r.width, im.id, im.height, im.width
                )));
            }
        }
        let mask = p
            .segmentation
            .to_mask(im.height, im.width)
            .map_err(|e| CocoError::Validation(format!("prediction {i}: {e}")))?;
        images.entry(p.image_id).or_default().preds.push(PredMask {
            score: p.score,
            mask,
        });
    }
    Ok(by_cat
        .into_iter()
        .map(|(c, imgs)| (c, imgs.into_values().collect()))
        .collect())
}

/// Per-category AP plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEval {
    pub ap: f64,
    pub categories: BTreeMap<u64, EvalResult>,
}

pub fn evaluate_dataset(
    gt: &Dataset,
    preds: &[PredictionInstance],
) -> Result<DatasetEval, CocoError> {
    let thresholds = coco_thresholds();
    let categories: BTreeMap<u64, EvalResult> = eval_images(gt, preds)?
        .into_iter()
        .map(|(c, imgs)| (c, average_precision(&imgs, &thresholds)))
        .collect();
    let ap = if categories.is_empty() {
        0.0
    } else {
        categories.values().map(|r| r.ap).sum::<f64>() / categories.len() as f64
    };
    Ok(DatasetEval { ap, categories })
}

/// IoU of two `[x, y, w, h]` boxes.
pub fn bbox_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let ih = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageOcclusion {
    pub image_id: u64,
    pub instances: usize,
    pub overlapping_pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionReport {
    pub images: usize,
    pub annotations: usize,
    pub mean_instances_per_image: f64,
    pub overlapping_pairs: u64,
    pub images_with_overlap: usize,
    /// Pairs with bbox IoU > 0, binned by IoU into tenths; the last bin
    /// includes 1.0.
    pub iou_histogram: [u64; 10],
    pub per_image: Vec<ImageOcclusion>,
}

impl OcclusionReport {
    pub fn overlap_fraction(&self) -> f64 {
        if self.images == 0 {
            0.0
        } else {
            self.images_with_overlap as f64 / self.images as f64
        }
    }
}

/// Pairwise bbox IoU per image. Boxes come from the rasterized masks when a
/// segmentation is present, from the `bbox` field otherwise.
pub fn occlusion_stats(d: &Dataset) -> OcclusionReport {
    let index = d.index();
    let mut per_image = Vec::with_capacity(d.images.len());
    let mut hist = [0u64; 10];
    for im in &d.images {
        let boxes: Vec<[f64; 4]> = index
            .annotations_of(im.id)
            .iter()
            .map(|&i| {
                let a = &d.annotations[i];
                a.segmentation
                    .as_ref()
                    .and_then(|s| s.to_mask(im.height, im.width).ok())
                    .map(|m| m.bbox().map_or([0.0; 4], |b| b.to_xywh()))
                    .unwrap_or(a.bbox)
            })
            .collect();
        let mut pairs = 0;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let iou = bbox_iou(boxes[i], boxes[j]);
                if iou > 0.0 {
                    pairs += 1;
                    hist[((iou * 10.0) as usize).min(9)] += 1;
                }
            }
        }
        per_image.push(ImageOcclusion {
            image_id: im.id,
            instances: boxes.len(),
            overlapping_pairs: pairs,
        });
    }
    let images = per_image.len();
    let annotations: usize = per_image.iter().map(|p| p.instances).sum();
    OcclusionReport {
        images,
        annotations,
        mean_instances_per_image: if images == 0 {
            0.0
        } else {
            annotations as f64 / images as f64
        },
        overlapping_pairs: per_image.iter().map(|p| p.overlapping_pairs).sum(),
        images_with_overlap: per_image.iter().filter(|p| p.overlapping_pairs > 0).count(),
        iou_histogram: hist,
        per_image,
    }
}
