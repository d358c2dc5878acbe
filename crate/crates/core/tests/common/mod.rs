//! Independent checks on augmented samples, shared by integration and
//! acceptance tests.
#![allow(dead_code)]

pub mod ap;

use std::collections::{HashMap, HashSet};

use ocp_core::coco::InstanceAnnotation;
use ocp_core::engine::{AugmentedSample, OcpConfig};

/// Row-major 0/1 raster of one annotation.
pub struct Raster {
    pub h: u32,
    pub w: u32,
    pub px: Vec<bool>,
}

impl Raster {
    pub fn of(a: &InstanceAnnotation, h: u32, w: u32) -> Raster {
        let m = a
            .segmentation
            .as_ref()
            .expect("checked annotations carry masks")
            .to_mask(h, w)
            .expect("segmentation decodes");
        let px = (0..h)
            .flat_map(|y| (0..w).map(move |x| (y, x)))
            .map(|(y, x)| m.get(y, x))
            .collect();
        Raster { h, w, px }
    }

    pub fn area(&self) -> u64 {
        self.px.iter().filter(|&&b| b).count() as u64
    }

    /// `[x, y, w, h]` by scanning, zeros when empty.
    pub fn bbox(&self) -> [f64; 4] {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        let mut any = false;
        for y in 0..self.h {
            for x in 0..self.w {
                if self.px[(y * self.w + x) as usize] {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        if !any {
            return [0.0; 4];
        }
        [
            x0 as f64,
            y0 as f64,
            (x1 - x0 + 1) as f64,
            (y1 - y0 + 1) as f64,
        ]
    }

    pub fn overlap(&self, other: &Raster) -> u64 {
        self.px
            .iter()
            .zip(&other.px)
            .filter(|(a, b)| **a && **b)
            .count() as u64
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub disjointness: usize,
    pub visibility: usize,
    pub bookkeeping: usize,
    pub count_bound: usize,
    pub min_size: usize,
    pub removal_log: usize,
}

impl Tally {
    pub fn total(&self) -> usize {
        self.disjointness
            + self.visibility
            + self.bookkeeping
            + self.count_bound
            + self.min_size
            + self.removal_log
    }

    pub fn add(&mut self, o: Tally) {
        self.disjointness += o.disjointness;
        self.visibility += o.visibility;
        self.bookkeeping += o.bookkeeping;
        self.count_bound += o.count_bound;
        self.min_size += o.min_size;
        self.removal_log += o.removal_log;
    }
}

/// Counts invariant violations of `out` produced from `input` under `config`.
pub fn check_sample(
    input: &[InstanceAnnotation],
    out: &AugmentedSample,
    config: &OcpConfig,
) -> Tally {
    let (h, w) = (out.image.height(), out.image.width());
    let mut t = Tally::default();
    let prov = &out.provenance;

    let pasted_ids: HashSet<u64> = prov.pastes.iter().map(|p| p.annotation_id).collect();
    let paste_area: HashMap<u64, u64> = prov
        .pastes
        .iter()
        .map(|p| (p.annotation_id, p.area))
        .collect();
    let input_by_id: HashMap<u64, &InstanceAnnotation> = input.iter().map(|a| (a.id, a)).collect();

    let rasters: Vec<(u64, Raster)> = out
        .annotations
        .iter()
        .filter(|a| a.segmentation.is_some())
        .map(|a| (a.id, Raster::of(a, h, w)))
        .collect();

    // bookkeeping
    for (a, (_, r)) in out
        .annotations
        .iter()
        .filter(|a| a.segmentation.is_some())
        .zip(&rasters)
    {
        if a.area != r.area() as f64 || a.bbox != r.bbox() {
            t.bookkeeping += 1;
        }
    }

    // disjointness of every pasted mask against every other output mask
    for (i, (id, r)) in rasters.iter().enumerate() {
        if !pasted_ids.contains(id) {
            continue;
        }
        for (j, (_, other)) in rasters.iter().enumerate() {
            if i != j && r.overlap(other) > 0 {
                t.disjointness += 1;
            }
        }
    }

    // visibility against the area at augmentation start
    for (id, r) in &rasters {
        let reference = if let Some(&a) = paste_area.get(id) {
            a
        } else if let Some(orig) = input_by_id.get(id) {
            Raster::of(orig, h, w).area()
        } else {
            t.visibility += 1;
            continue;
        };
        let area = r.area();
        if area == reference {
            continue;
        }
        let fraction = area as f64 / reference as f64;
        if fraction < config.visibility_threshold || area < config.min_visible_px {
            t.visibility += 1;
        }
    }

    // added count
    let added = out
        .annotations
        .iter()
        .filter(|a| pasted_ids.contains(&a.id))
        .count();
    if added > config.r_paste[1] as usize || prov.pastes.len() > config.r_paste[1] as usize {
        t.count_bound += 1;
    }

    // min size at paste time
    let canvas = (h as f64 * w as f64).sqrt();
    for p in &prov.pastes {
        if (p.area as f64).sqrt() / canvas < config.min_size_ratio {
            t.min_size += 1;
        }
    }

    // every vanished input annotation is logged as removed, and vice versa
    let out_ids: HashSet<u64> = out.annotations.iter().map(|a| a.id).collect();
    let removed: HashSet<u64> = prov.removed_annotation_ids.iter().copied().collect();
    for a in input {
        if out_ids.contains(&a.id) == removed.contains(&a.id) {
            t.removal_log += 1;
        }
    }
    for id in &removed {
        if !input_by_id.contains_key(id) && !pasted_ids.contains(id) {
            t.removal_log += 1;
        }
    }
    t
}
