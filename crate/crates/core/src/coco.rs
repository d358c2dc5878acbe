//! COCO instances JSON: data model, parsing with cross-reference validation,
//! serialization, and the fully-labelled subset filter.
//!
//! Fields the model does not know about are kept in each record's `extra`
//! map and written back unchanged.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{CocoError, MaskError};
use crate::mask::BinaryMask;
use crate::polygon::{polygons_to_mask, PolygonSet};
use crate::rle::{rle_decode, RleMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub height: u32,
    pub width: u32,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    Polygons(PolygonSet),
    Rle(RleMask),
}

impl Segmentation {
    /// Structural emptiness: no polygons, or an RLE with no foreground run.
    pub fn is_empty(&self) -> bool {
        match self {
            Segmentation::Polygons(p) => p.polygons.is_empty(),
            Segmentation::Rle(r) => r.area() == 0,
        }
    }

    pub fn to_mask(&self, height: u32, width: u32) -> Result<BinaryMask, MaskError> {
        match self {
            Segmentation::Polygons(p) => polygons_to_mask(p, height, width),
            Segmentation::Rle(r) => {
                if (r.height, r.width) != (height, width) {
                    return Err(MaskError::DimensionMismatch {
                        left: (r.height, r.width),
                        right: (height, width),
                    });
                }
                rle_decode(r)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawCounts {
    Compressed(String),
    Runs(Vec<u32>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSegmentation {
    Polygons(Vec<Vec<f64>>),
    Rle { size: [u32; 2], counts: RawCounts },
}

impl Serialize for Segmentation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = match self {
            Segmentation::Polygons(p) => RawSegmentation::Polygons(p.to_flat()),
            Segmentation::Rle(r) => RawSegmentation::Rle {
                size: [r.height, r.width],
                counts: RawCounts::Compressed(r.to_compressed()),
            },
        };
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Segmentation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match RawSegmentation::deserialize(deserializer)? {
            RawSegmentation::Polygons(flat) => PolygonSet::from_flat(&flat)
                .map(Segmentation::Polygons)
                .map_err(D::Error::custom),
            RawSegmentation::Rle {
                size: [h, w],
                counts,
            } => {
                let rle = match counts {
                    RawCounts::Compressed(s) => RleMask::from_compressed(h, w, &s),
                    RawCounts::Runs(runs) => RleMask::new(h, w, runs),
                };
                rle.map(Segmentation::Rle).map_err(D::Error::custom)
            }
        }
    }
}

fn iscrowd_from_any<'de, D: Deserializer<'de>>(deserializer: D) -> Result<u8, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(u8),
    }
    Ok(match Flag::deserialize(deserializer)? {
        Flag::Bool(b) => b as u8,
        Flag::Int(i) => (i != 0) as u8,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub bbox: [f64; 4],
    #[serde(default, deserialize_with = "iscrowd_from_any")]
    pub iscrowd: u8,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl InstanceAnnotation {
    pub fn is_crowd(&self) -> bool {
        self.iscrowd != 0
    }

    /// A segmentation is present and carries at least one polygon or foreground run.
    pub fn has_mask(&self) -> bool {
        self.segmentation.as_ref().is_some_and(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(default)]
    pub images: Vec<ImageRecord>,
    #[serde(default)]
    pub annotations: Vec<InstanceAnnotation>,
    #[serde(default)]
    pub categories: Vec<Category>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Positional lookups over a [`Dataset`].
#[derive(Debug, Clone, Default)]
pub struct DatasetIndex {
    image_pos: HashMap<u64, usize>,
    by_image: HashMap<u64, Vec<usize>>,
}

impl DatasetIndex {
    pub fn new(d: &Dataset) -> Self {
        let image_pos = d
            .images
            .iter()
            .enumerate()
            .map(|(i, im)| (im.id, i))
            .collect();
        let mut by_image: HashMap<u64, Vec<usize>> = HashMap::new();
        for (i, a) in d.annotations.iter().enumerate() {
            by_image.entry(a.image_id).or_default().push(i);
        }
        Self {
            image_pos,
            by_image,
        }
    }

    pub fn image<'a>(&self, d: &'a Dataset, id: u64) -> Option<&'a ImageRecord> {
        self.image_pos.get(&id).map(|&i| &d.images[i])
    }

    /// Annotation positions for `image_id`, in document order.
    pub fn annotations_of(&self, image_id: u64) -> &[usize] {
        self.by_image
            .get(&image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

pub fn parse_dataset(raw: &str) -> Result<Dataset, CocoError> {
    let d: Dataset = serde_json::from_str(raw).map_err(|e| json_error(raw, &e))?;
    d.validate()?;
    Ok(d)
}

pub fn serialize_dataset(d: &Dataset) -> Result<String, CocoError> {
    Ok(serde_json::to_string(d)?)
}

pub(crate) fn json_error(raw: &str, e: &serde_json::Error) -> CocoError {
    let (line, column) = (e.line(), e.column());
    let offset = if line == 0 {
        0
    } else {
        raw.split_inclusive('\n')
            .take(line - 1)
            .map(str::len)
            .sum::<usize>()
            + column.saturating_sub(1)
    };
    CocoError::Parse {
        offset,
        line,
        column,
        message: e.to_string(),
    }
}

impl Dataset {
    pub fn index(&self) -> DatasetIndex {
        DatasetIndex::new(self)
    }

    /// Checks id uniqueness, image dimensions, cross-references and RLE sizes.
    pub fn validate(&self) -> Result<(), CocoError> {
        let mut dims = HashMap::with_capacity(self.images.len());
        for im in &self.images {
            if im.height == 0 || im.width == 0 {
                return Err(CocoError::Validation(format!(
                    "image {} has zero size ({}x{})",
                    im.id, im.height, im.width
                )));
            }
            if dims.insert(im.id, (im.height, im.width)).is_some() {
                return Err(CocoError::Validation(format!(
                    "duplicate image id {}",
                    im.id
                )));
            }
        }
        let mut categories = HashSet::with_capacity(self.categories.len());
        for c in &self.categories {
            if !categories.insert(c.id) {
                return Err(CocoError::Validation(format!(
                    "duplicate category id {}",
                    c.id
                )));
            }
        }
        let mut ann_ids = HashSet::with_capacity(self.annotations.len());
        for a in &self.annotations {
            if !ann_ids.insert(a.id) {
                return Err(CocoError::Validation(format!(
                    "duplicate annotation id {}",
                    a.id
                )));
            }
            let Some(&(h, w)) = dims.get(&a.image_id) else {
                return Err(CocoError::Validation(format!(
                    "annotation {} references missing image_id {}",
                    a.id, a.image_id
                )));
            };
            if !categories.contains(&a.category_id) {
                return Err(CocoError::Validation(format!(
                    "annotation {} references missing category_id {}",
                    a.id, a.category_id
                )));
            }
            if let Some(Segmentation::Rle(r)) = &a.segmentation {
                if (r.height, r.width) != (h, w) {
                    return Err(CocoError::Segmentation {
                        annotation_id: a.id,
                        source: MaskError::DimensionMismatch {
                            left: (r.height, r.width),
                            right: (h, w),
                        },
                    });
                }
            }
        }
        Ok(())
    }

    /// Annotations whose stored `area` disagrees with the rasterized mask by
    /// more than 1% or 5 pixels, whichever is larger. Returns
    /// `(annotation id, stored, rasterized)`.
    pub fn stale_areas(&self) -> Vec<(u64, f64, u64)> {
        let index = self.index();
        let mut out = Vec::new();
        for a in &self.annotations {
            let (Some(seg), Some(im)) = (&a.segmentation, index.image(self, a.image_id)) else {
                continue;
            };
            let Ok(mask) = seg.to_mask(im.height, im.width) else {
                continue;
            };
            let area = mask.area();
            let tolerance = (a.area * 0.01).max(5.0);
            if (a.area - area as f64).abs() > tolerance {
                out.push((a.id, a.area, area));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub images_kept: usize,
    pub images_dropped: usize,
    pub annotations_kept: usize,
    pub annotations_dropped: usize,
}

/// Keeps only images in which every annotation has a present, non-empty
/// segmentation. Annotations of dropped images go with them.
pub fn filter_fully_labelled(d: &Dataset) -> (Dataset, FilterReport) {
    let partial: HashSet<u64> = d
        .annotations
        .iter()
        .filter(|a| !a.has_mask())
        .map(|a| a.image_id)
        .collect();
    let images: Vec<ImageRecord> = d
        .images
        .iter()
        .filter(|im| !partial.contains(&im.id))
        .cloned()
        .collect();
    let annotations: Vec<InstanceAnnotation> = d
        .annotations
        .iter()
        .filter(|a| !partial.contains(&a.image_id))
        .cloned()
        .collect();
    let report = FilterReport {
        images_kept: images.len(),
        images_dropped: d.images.len() - images.len(),
        annotations_kept: annotations.len(),
        annotations_dropped: d.annotations.len() - annotations.len(),
    };
    let out = Dataset {
        images,
        annotations,
        categories: d.categories.clone(),
        extra: d.extra.clone(),
    };
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rle::rle_encode;
    use serde_json::json;

    fn doc(annotations: Value) -> String {
        json!({
            "info": {"description": "fixture", "year": 2022},
            "images": [
                {"id": 1, "file_name": "a.jpg", "height": 8, "width": 8, "license": 3},
                {"id": 2, "file_name": "b.jpg", "height": 8, "width": 8}
            ],
            "annotations": annotations,
            "categories": [{"id": 1, "name": "person", "supercategory": "person"}]
        })
        .to_string()
    }

    fn square_ann(id: u64, image_id: u64) -> Value {
        json!({"id": id, "image_id": image_id, "category_id": 1,
               "segmentation": [[0, 0, 4, 0, 4, 4, 0, 4]],
               "area": 16.0, "bbox": [0, 0, 4, 4], "iscrowd": 0})
    }

    #[test]
    fn one_image_no_annotations() {
        let raw = json!({"images": [{"id": 7, "file_name": "x.png", "height": 2, "width": 3}],
                         "annotations": [], "categories": []})
        .to_string();
        let d = parse_dataset(&raw).unwrap();
        assert_eq!(d.images.len(), 1);
        assert!(d.annotations.is_empty());
    }

    #[test]
    fn dangling_image_reference() {
        let raw = doc(json!([square_ann(5, 99)]));
        match parse_dataset(&raw) {
            Err(CocoError::Validation(msg)) => assert!(msg.contains("99"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_category_and_duplicates() {
        let mut bad_cat = square_ann(5, 1);
        bad_cat["category_id"] = json!(42);
        assert!(
            matches!(parse_dataset(&doc(json!([bad_cat]))), Err(CocoError::Validation(m)) if m.contains("42"))
        );
        let dup = doc(json!([square_ann(5, 1), square_ann(5, 2)]));
        assert!(
            matches!(parse_dataset(&dup), Err(CocoError::Validation(m)) if m.contains("duplicate annotation"))
        );
    }

    #[test]
    fn malformed_json_reports_offset() {
        let raw = "{\n  \"images\": [,]\n}";
        match parse_dataset(raw) {
            Err(CocoError::Parse { offset, line, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(&raw[offset..offset + 1], ",");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_with_many_images() {
        let images: Vec<Value> = (1..=64_115)
            .map(|i| json!({"id": i, "file_name": format!("{i:012}.jpg"), "height": 480, "width": 640}))
            .collect();
        let raw = json!({"images": images, "annotations": [], "categories": [{"id": 1, "name": "person"}]});
        let d = parse_dataset(&raw.to_string()).unwrap();
        assert_eq!(d.images.len(), 64_115);
    }

    #[test]
    fn empty_dataset_serializes_to_empty_arrays() {
        let v: Value =
            serde_json::from_str(&serialize_dataset(&Dataset::default()).unwrap()).unwrap();
        assert_eq!(
            v,
            json!({"images": [], "annotations": [], "categories": []})
        );
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let raw = doc(json!([square_ann(5, 1)]));
        let d = parse_dataset(&raw).unwrap();
        assert_eq!(d.images[0].extra["license"], json!(3));
        assert_eq!(d.extra["info"]["year"], json!(2022));
        assert_eq!(d.categories[0].extra["supercategory"], json!("person"));
        let again = parse_dataset(&serialize_dataset(&d).unwrap()).unwrap();
        assert_eq!(again, d);
        let reread: Value = serde_json::from_str(&serialize_dataset(&again).unwrap()).unwrap();
        let original: Value = serde_json::from_str(&raw).unwrap();
        assert_eq!(reread["info"], original["info"]);
        assert_eq!(reread["images"], original["images"]);
    }

    #[test]
    fn rle_segmentation_serializes_size_and_counts() {
        let mut mask = BinaryMask::new(8, 8);
        mask.set(0, 0, true);
        mask.set(3, 5, true);
        let rle = rle_encode(&mask);
        let mut ann = square_ann(5, 1);
        ann["segmentation"] = json!({"size": [8, 8], "counts": rle.counts.clone()});
        ann["iscrowd"] = json!(true);
        let d = parse_dataset(&doc(json!([ann]))).unwrap();
        assert_eq!(d.annotations[0].iscrowd, 1);
        let v: Value = serde_json::from_str(&serialize_dataset(&d).unwrap()).unwrap();
        let seg = &v["annotations"][0]["segmentation"];
        assert_eq!(seg["size"], json!([8, 8]));
        // reference encoder output for this bitmap
        assert_eq!(rle.counts, vec![0, 1, 42, 1, 20]);
        assert_eq!(seg["counts"], json!("01Z10ZO"));
        assert_eq!(v["annotations"][0]["iscrowd"], json!(1));
        assert_eq!(parse_dataset(&v.to_string()).unwrap(), d);
    }

    #[test]
    fn rle_size_must_match_image() {
        let mut ann = square_ann(5, 1);
        ann["segmentation"] = json!({"size": [4, 4], "counts": [16]});
        assert!(matches!(
            parse_dataset(&doc(json!([ann]))),
            Err(CocoError::Segmentation {
                annotation_id: 5,
                ..
            })
        ));
    }

    #[test]
    fn fully_labelled_filter() {
        let mut missing = square_ann(3, 2);
        missing.as_object_mut().unwrap().remove("segmentation");
        let d = parse_dataset(&doc(json!([
            square_ann(1, 1),
            square_ann(2, 1),
            missing,
            square_ann(4, 2)
        ])))
        .unwrap();
        let (kept, report) = filter_fully_labelled(&d);
        assert_eq!(
            kept.images.iter().map(|i| i.id).collect::<Vec<_>>(),
            vec![1]
        );
        assert_eq!(
            kept.annotations.iter().map(|a| a.id).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert_eq!(
            report,
            FilterReport {
                images_kept: 1,
                images_dropped: 1,
                annotations_kept: 2,
                annotations_dropped: 2
            }
        );
        assert_eq!(filter_fully_labelled(&kept).0, kept);
    }

    #[test]
    fn empty_polygon_list_counts_as_unlabelled() {
        let mut empty = square_ann(3, 2);
        empty["segmentation"] = json!([]);
        let d = parse_dataset(&doc(json!([square_ann(1, 1), empty]))).unwrap();
        assert_eq!(filter_fully_labelled(&d).1.images_kept, 1);
    }

    #[test]
    fn stale_area_detection() {
        let mut stale = square_ann(2, 1);
        stale["area"] = json!(40.0);
        let d = parse_dataset(&doc(json!([square_ann(1, 1), stale]))).unwrap();
        assert_eq!(d.stale_areas(), vec![(2, 40.0, 16)]);
    }
}
