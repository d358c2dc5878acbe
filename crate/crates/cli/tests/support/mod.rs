#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ocp_cli::io::encode_png;
use ocp_core::synth::{synth_dataset, SynthSpec};
use ocp_core::{serialize_dataset, Dataset, MemoryImages};

pub struct Fixture {
    pub dataset: Dataset,
    pub pixels: MemoryImages,
    pub dataset_path: PathBuf,
    pub images: PathBuf,
}

/// Writes `instances.json` and one PNG per image under `dir`.
pub fn write_fixture(dir: &Path, spec: &SynthSpec) -> Fixture {
    let (dataset, pixels) = synth_dataset(spec);
    write_dataset(dir, dataset, pixels)
}

pub fn write_dataset(dir: &Path, dataset: Dataset, pixels: MemoryImages) -> Fixture {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    for im in &dataset.images {
        std::fs::write(
            images.join(&im.file_name),
            encode_png(pixels.get(im.id).unwrap()),
        )
        .unwrap();
    }
    let dataset_path = dir.join("instances.json");
    std::fs::write(&dataset_path, serialize_dataset(&dataset).unwrap()).unwrap();
    Fixture {
        dataset,
        pixels,
        dataset_path,
        images,
    }
}

pub fn ten_images(dir: &Path) -> Fixture {
    write_fixture(
        dir,
        &SynthSpec {
            images: 10,
            seed: 3,
            ..SynthSpec::default()
        },
    )
}
