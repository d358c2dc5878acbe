mod support;

use std::path::Path;
use std::process::Command;

use ocp_cli::generate::ProvenanceLine;
use ocp_cli::{
    load_config, run_eval, run_generate, run_preview, run_stats, CliError, GenerateArgs,
    PreviewArgs,
};
use ocp_core::engine::{OcpConfig, Preset};
use ocp_core::synth::{single_instance_dataset, SynthSpec};
use ocp_core::{parse_dataset, serialize_dataset};
use support::{ten_images, write_dataset, write_fixture};

fn gen_args(fx: &support::Fixture, out: &Path, config: OcpConfig) -> GenerateArgs {
    GenerateArgs {
        config,
        config_path: None,
        dataset: fx.dataset_path.clone(),
        images: fx.images.clone(),
        out: out.to_path_buf(),
        epochs: 1,
        paste_source: None,
        jpeg: false,
    }
}

fn ocp_seeded(seed: u64) -> OcpConfig {
    OcpConfig {
        seed,
        p_cp: 1.0,
        ..Preset::Ocp.config()
    }
}

fn read_provenance(out: &Path) -> Vec<ProvenanceLine> {
    std::fs::read_to_string(out.join("provenance.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn generate_writes_one_image_and_line_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let out = dir.path().join("out");
    let m = run_generate(&gen_args(&fx, &out, ocp_seeded(1))).unwrap();
    let pngs = std::fs::read_dir(out.join("images")).unwrap().count();
    assert_eq!(pngs, 10);
    let prov = read_provenance(&out);
    assert_eq!(prov.len(), 10);
    assert_eq!(m.counts.images_processed, 10);
    assert_eq!(
        m.counts.instances_pasted,
        prov.iter()
            .map(|p| p.record.pastes.len() as u64)
            .sum::<u64>()
    );
    assert_eq!(
        m.counts.instances_removed,
        prov.iter()
            .map(|p| p.record.removed_annotation_ids.len() as u64)
            .sum::<u64>()
    );
    let merged =
        parse_dataset(&std::fs::read_to_string(out.join("annotations.json")).unwrap()).unwrap();
    merged.validate().unwrap();
    let ids: Vec<u64> = merged.annotations.iter().map(|a| a.id).collect();
    assert_eq!(ids, (1..=ids.len() as u64).collect::<Vec<_>>());
    assert_eq!(m.counts.output_annotations, ids.len() as u64);
    assert!(merged.stale_areas().is_empty());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(
        manifest["timings"]["augment_ms_p50"].as_f64().unwrap()
            <= manifest["timings"]["augment_ms_p95"].as_f64().unwrap()
    );
    // staging directory is gone
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".out.tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn epochs_multiply_outputs_with_unique_ids() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let out = dir.path().join("out");
    let mut args = gen_args(&fx, &out, ocp_seeded(2));
    args.epochs = 3;
    let m = run_generate(&args).unwrap();
    assert_eq!(m.counts.images_processed, 30);
    let merged =
        parse_dataset(&std::fs::read_to_string(out.join("annotations.json")).unwrap()).unwrap();
    merged.validate().unwrap();
    assert_eq!(merged.images.len(), 30);
}

#[test]
fn zero_probability_keeps_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let out = dir.path().join("out");
    let config = OcpConfig {
        p_cp: 0.0,
        ..OcpConfig::default()
    };
    run_generate(&gen_args(&fx, &out, config)).unwrap();
    let merged =
        parse_dataset(&std::fs::read_to_string(out.join("annotations.json")).unwrap()).unwrap();
    assert_eq!(merged.annotations.len(), fx.dataset.annotations.len());
    for (a, b) in merged.annotations.iter().zip(&fx.dataset.annotations) {
        assert_eq!(
            (a.category_id, a.area, a.bbox, &a.segmentation),
            (b.category_id, b.area, b.bbox, &b.segmentation)
        );
    }
    let prov = read_provenance(&out);
    assert!(prov.iter().all(|p| !p.record.applied));
    for p in &prov {
        let orig: Vec<u64> = fx
            .dataset
            .annotations
            .iter()
            .filter(|a| a.image_id == p.record.base_image_id)
            .map(|a| a.id)
            .collect();
        let mapped: Vec<u64> = p.id_map.iter().map(|e| e.source_id.unwrap()).collect();
        assert_eq!(mapped, orig);
    }
}

#[test]
fn output_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let run = |name: &str, threads: usize| {
        let out = dir.path().join(name);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_generate(&gen_args(&fx, &out, ocp_seeded(7))).unwrap());
        out
    };
    let a = run("a", 1);
    let b = run("b", 4);
    for f in ["annotations.json", "provenance.jsonl"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    for e in std::fs::read_dir(a.join("images")).unwrap() {
        let e = e.unwrap();
        assert_eq!(
            std::fs::read(e.path()).unwrap(),
            std::fs::read(b.join("images").join(e.file_name())).unwrap()
        );
    }
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"r_paste": [5, 1]}"#).unwrap();
    let err = load_config(Some(&cfg), None, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert_eq!(
        err.to_string(),
        OcpConfig::from_json(r#"{"r_paste": [5, 1]}"#)
            .unwrap_err()
            .to_string()
    );
    let out = dir.path().join("out");
    let bad = OcpConfig {
        p_cp: 3.0,
        ..OcpConfig::default()
    };
    let err = run_generate(&gen_args(&fx, &out, bad)).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert!(!out.exists());
}

#[test]
fn config_file_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"p_cp": 0.25, "n_basket": 4}"#).unwrap();
    let c = load_config(Some(&cfg), Some("basic"), Some(99)).unwrap();
    assert_eq!(c.p_cp, 0.25);
    assert_eq!(c.n_basket, 4);
    assert_eq!(c.r_paste, Preset::Basic.config().r_paste);
    assert_eq!(c.seed, 99);
    let err = load_config(None, Some("nope"), None).unwrap_err();
    assert!(err.to_string().contains("blend-random"));
}

#[test]
fn existing_output_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let err = run_generate(&gen_args(&fx, &out, ocp_seeded(1))).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn unreadable_image_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    std::fs::remove_file(fx.images.join(&fx.dataset.images[4].file_name)).unwrap();
    let out = dir.path().join("out");
    let m = run_generate(&gen_args(&fx, &out, ocp_seeded(1))).unwrap();
    assert_eq!(m.counts.images_processed, 9);
    assert_eq!(m.counts.images_skipped, 1);
    assert_eq!(m.skipped_images[0].image_id, 5);
    assert!(m.skipped_images[0]
        .reason
        .contains(&fx.dataset.images[4].file_name));
    assert_eq!(read_provenance(&out).len(), 9);
}

#[test]
fn paste_source_supplies_the_pool() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    // pool restricted to image 2
    let mut pool = fx.dataset.clone();
    pool.annotations.retain(|a| a.image_id == 2);
    let pool_path = dir.path().join("pool.json");
    std::fs::write(&pool_path, serialize_dataset(&pool).unwrap()).unwrap();
    let out = dir.path().join("out");
    let mut args = gen_args(&fx, &out, ocp_seeded(5));
    args.paste_source = Some(pool_path);
    run_generate(&args).unwrap();
    let prov = read_provenance(&out);
    assert!(prov.iter().any(|p| !p.record.pastes.is_empty()));
    for p in &prov {
        assert!(p.record.pastes.iter().all(|x| x.source_image_id == 2));
    }
}

#[test]
fn jpeg_output() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let out = dir.path().join("out");
    let mut args = gen_args(&fx, &out, ocp_seeded(1));
    args.jpeg = true;
    run_generate(&args).unwrap();
    let names: Vec<String> = std::fs::read_dir(out.join("images"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| n.ends_with(".jpg")));
}

fn preview_args(
    fx: &support::Fixture,
    out: &Path,
    config: OcpConfig,
    image_id: u64,
) -> PreviewArgs {
    PreviewArgs {
        config,
        dataset: fx.dataset_path.clone(),
        images: fx.images.clone(),
        image_id,
        out: out.to_path_buf(),
        paste_source: None,
    }
}

#[test]
fn preview_behaviour() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(
        dir.path(),
        &SynthSpec {
            images: 6,
            instances: [2, 2],
            ..SynthSpec::default()
        },
    );
    let off = OcpConfig {
        p_cp: 0.0,
        ..OcpConfig::default()
    };
    let s = run_preview(&preview_args(&fx, &dir.path().join("p0.png"), off, 1)).unwrap();
    assert_eq!((s.original_instances, s.pasted_instances), (2, 0));

    for id in 1..=6 {
        let s = run_preview(&preview_args(
            &fx,
            &dir.path().join("p1.png"),
            ocp_seeded(3),
            id,
        ))
        .unwrap();
        let total = s.original_instances + s.pasted_instances;
        assert!(total <= 5 && s.original_instances <= 2);
    }

    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    run_preview(&preview_args(&fx, &a, ocp_seeded(9), 2)).unwrap();
    run_preview(&preview_args(&fx, &b, ocp_seeded(9), 2)).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    image::open(&a).unwrap();

    let err = run_preview(&preview_args(
        &fx,
        &dir.path().join("x.png"),
        ocp_seeded(9),
        99,
    ))
    .unwrap_err();
    assert!(err.to_string().contains("1..=6"), "{err}");
}

#[test]
fn stats_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (d, px) = single_instance_dataset(20, 1);
    let fx = write_dataset(dir.path(), d, px);
    let report = run_stats(&fx.dataset_path, Some(&dir.path().join("stats.json"))).unwrap();
    assert_eq!(report.overlapping_pairs, 0);
    assert!(dir.path().join("stats.json").exists());

    let out = dir.path().join("out");
    run_generate(&gen_args(&fx, &out, ocp_seeded(4))).unwrap();
    let aug = run_stats(&out.join("annotations.json"), None).unwrap();
    assert!(aug.overlapping_pairs > 0);

    let empty = dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"images": [], "annotations": [], "categories": []}"#,
    )
    .unwrap();
    let r = run_stats(&empty, None).unwrap();
    assert_eq!((r.images, r.annotations, r.overlapping_pairs), (0, 0, 0));

    // ground truth as predictions
    let preds: Vec<serde_json::Value> = fx
        .dataset
        .annotations
        .iter()
        .map(|a| {
            serde_json::json!({"image_id": a.image_id, "category_id": a.category_id,
                                     "segmentation": a.segmentation, "score": 1.0})
        })
        .collect();
    let pred_path = dir.path().join("preds.json");
    std::fs::write(&pred_path, serde_json::to_string(&preds).unwrap()).unwrap();
    let r = run_eval(
        &fx.dataset_path,
        &pred_path,
        Some(&dir.path().join("eval.json")),
    )
    .unwrap();
    assert_eq!(r.ap, 1.0);
    std::fs::write(&pred_path, "[]").unwrap();
    assert_eq!(
        run_eval(&fx.dataset_path, &pred_path, None).unwrap().ap,
        0.0
    );
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let fx = ten_images(dir.path());
    let bin = env!("CARGO_BIN_EXE_ocp");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();

    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"p_cp": -1}"#).unwrap();
    let ds = fx.dataset_path.to_str().unwrap();
    let im = fx.images.to_str().unwrap();
    let out = dir.path().join("o1");
    let o1 = out.to_str().unwrap();
    assert_eq!(
        status(&[
            "generate",
            "--config",
            bad_cfg.to_str().unwrap(),
            "--dataset",
            ds,
            "--images",
            im,
            "--out",
            o1
        ]),
        Some(2)
    );
    assert!(!out.exists());
    assert_eq!(
        status(&["stats", "--dataset", "/nonexistent.json"]),
        Some(3)
    );
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"images": [{"id": 1}]}"#).unwrap();
    assert_eq!(
        status(&["stats", "--dataset", broken.to_str().unwrap()]),
        Some(4)
    );
    assert_eq!(
        status(&[
            "generate",
            "--preset",
            "basic",
            "--seed",
            "3",
            "--dataset",
            ds,
            "--images",
            im,
            "--out",
            o1
        ]),
        Some(0)
    );
    assert!(out.join("manifest.json").exists());
}
