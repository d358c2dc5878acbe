//! Deterministic synthetic datasets with matching pixel data, for tests,
//! benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Map;

use crate::coco::{Category, Dataset, ImageRecord, InstanceAnnotation, Segmentation};
use crate::engine::MemoryImages;
use crate::image::ImageBuffer;
use crate::polygon::{polygons_to_mask, PolygonSet};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub images: usize,
    pub height: u32,
    pub width: u32,
    /// Inclusive range of instances per image.
    pub instances: [usize; 2],
    /// Inclusive range of instance diameters in pixels.
    pub diameter: [f64; 2],
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            images: 10,
            height: 96,
            width: 128,
            instances: [1, 3],
            diameter: [16.0, 48.0],
            seed: 0,
        }
    }
}

/// A star-shaped 12-gon around `(cx, cy)`.
fn blob<R: Rng>(rng: &mut R, cx: f64, cy: f64, radius: f64) -> PolygonSet {
    let n = 12;
    let phase = rng.gen::<f64>() * std::f64::consts::TAU;
    let aspect = rng.gen_range(0.6..1.4);
    let pts = (0..n)
        .map(|i| {
            let t = phase + std::f64::consts::TAU * i as f64 / n as f64;
            let r = radius * rng.gen_range(0.75..1.0);
            let x = cx + r * t.cos() * aspect;
            let y = cy + r * t.sin() / aspect;
            ((x * 100.0).round() / 100.0, (y * 100.0).round() / 100.0)
        })
        .collect();
    PolygonSet::new(vec![pts])
}

/// Builds a dataset of `spec.images` images with category 1 ("person")
/// instances drawn as filled blobs, plus the rendered pixels.
///
/// Image ids run from 1, annotation ids from 1 in image order. Stored `area`
/// and `bbox` agree with the rasterized masks.
pub fn synth_dataset(spec: &SynthSpec) -> (Dataset, MemoryImages) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h, w) = (spec.height, spec.width);
    let mut images = Vec::with_capacity(spec.images);
    let mut annotations = Vec::new();
    let mut pixels = MemoryImages::new();
    let mut next_ann = 1u64;
    for i in 0..spec.images {
        let image_id = i as u64 + 1;
        let base: [u8; 3] = [
            rng.gen_range(40..200),
            rng.gen_range(40..200),
            rng.gen_range(40..200),
        ];
        let mut img = ImageBuffer::from_fn(h, w, |y, x| {
            let g = ((x * 3 + y * 5) % 32) as u8;
            [
                base[0].wrapping_add(g),
                base[1],
                base[2].wrapping_add(g / 2),
            ]
        });
        let n = rng.gen_range(spec.instances[0]..=spec.instances[1]);
        for _ in 0..n {
            let d = rng.gen_range(spec.diameter[0]..=spec.diameter[1]);
            let r = d / 2.0;
            let cx = rng.gen_range(r.min(w as f64 / 2.0)..=(w as f64 - r).max(w as f64 / 2.0));
            let cy = rng.gen_range(r.min(h as f64 / 2.0)..=(h as f64 - r).max(h as f64 / 2.0));
            let poly = blob(&mut rng, cx, cy, r);
            let mask = polygons_to_mask(&poly, h, w).expect("blob polygons are well formed");
            let Some(bbox) = mask.bbox() else { continue };
            let color: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
            for y in bbox.y..bbox.y + bbox.h {
                for x in bbox.x..bbox.x + bbox.w {
                    if mask.get(y, x) {
                        let t = ((x + y) % 7) as u8 * 4;
                        img.put_pixel(
                            y,
                            x,
                            [
                                color[0].saturating_add(t),
                                color[1],
                                color[2].saturating_sub(t),
                            ],
                        );
                    }
                }
            }
            annotations.push(InstanceAnnotation {
                id: next_ann,
                image_id,
                category_id: 1,
                segmentation: Some(Segmentation::Polygons(poly)),
                area: mask.area() as f64,
                bbox: bbox.to_xywh(),
                iscrowd: 0,
                extra: Map::new(),
            });
            next_ann += 1;
        }
        images.push(ImageRecord {
            id: image_id,
            file_name: format!("{image_id:06}.png"),
            height: h,
            width: w,
            extra: Map::new(),
        });
        pixels.insert(image_id, img);
    }
    let dataset = Dataset {
        images,
        annotations,
        categories: vec![Category {
            id: 1,
            name: "person".into(),
            extra: Map::new(),
        }],
        extra: Map::new(),
    };
    (dataset, pixels)
}

/// Exactly one instance per image.
pub fn single_instance_dataset(images: usize, seed: u64) -> (Dataset, MemoryImages) {
    synth_dataset(&SynthSpec {
        images,
        instances: [1, 1],
        seed,
        ..SynthSpec::default()
    })
}
