//! `stats` and `eval` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use ocp_core::eval::{
    evaluate_dataset, occlusion_stats, parse_predictions, DatasetEval, OcclusionReport,
};

use crate::error::CliError;
use crate::io::{load_dataset, read_text, write_bytes};

pub fn format_occlusion(r: &OcclusionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "images                   {}", r.images);
    let _ = writeln!(s, "annotations              {}", r.annotations);
    let _ = writeln!(
        s,
        "mean instances / image   {:.3}",
        r.mean_instances_per_image
    );
    let _ = writeln!(s, "overlapping pairs        {}", r.overlapping_pairs);
    let _ = writeln!(
        s,
        "images with overlap      {} ({:.1}%)",
        r.images_with_overlap,
        100.0 * r.overlap_fraction()
    );
    let _ = writeln!(s, "bbox IoU histogram");
    for (i, n) in r.iou_histogram.iter().enumerate() {
        let _ = writeln!(
            s,
            "  [{:.1}, {:.1}{} {n}",
            i as f64 / 10.0,
            (i + 1) as f64 / 10.0,
            if i == 9 { "]" } else { ")" }
        );
    }
    s
}

pub fn run_stats(dataset: &Path, out: Option<&Path>) -> Result<OcclusionReport, CliError> {
    let d = load_dataset(dataset)?;
    let report = occlusion_stats(&d);
    print!("{}", format_occlusion(&report));
    if let Some(out) = out {
        let json = serde_json::to_string_pretty(&report).expect("report is serializable");
        write_bytes(out, json.as_bytes())?;
    }
    Ok(report)
}

pub fn format_eval(r: &DatasetEval) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "AP {:.3}", r.ap);
    for (cat, res) in &r.categories {
        let _ = writeln!(
            s,
            "category {cat}: AP {:.3} ({} gt, {} predictions)",
            res.ap, res.num_gt, res.num_predictions
        );
        for t in &res.per_threshold {
            let _ = writeln!(s, "  AP@{:.2} {:.3}", t.iou_threshold, t.ap);
        }
    }
    s
}

pub fn run_eval(
    gt: &Path,
    predictions: &Path,
    out: Option<&Path>,
) -> Result<DatasetEval, CliError> {
    let d = load_dataset(gt)?;
    let raw = read_text(predictions)?;
    let preds = parse_predictions(&raw)
        .map_err(|e| CliError::Validation(format!("{}: {e}", predictions.display())))?;
    let result = evaluate_dataset(&d, &preds)?;
    print!("{}", format_eval(&result));
    if let Some(out) = out {
        let json = serde_json::to_string_pretty(&result).expect("result is serializable");
        write_bytes(out, json.as_bytes())?;
    }
    Ok(result)
}
