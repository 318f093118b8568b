#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use alfa_core::classifier::{save_model, train, ForestModel, TrainParams};
use alfa_core::pipeline::{analyze, PipelineOptions};
use alfa_core::protocol::{EccLevel, Version};
use alfa_core::synth::{make_specimen, synthetic_urls, QrSpecimen, StyleSpec};

pub fn alfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alfa"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn specimen(payload: &str, style: &str, version: Option<u32>) -> QrSpecimen {
    make_specimen(
        payload.as_bytes(),
        EccLevel::H,
        version.map(|n| Version::new(n).unwrap()),
        &StyleSpec::preset(style).unwrap(),
    )
    .unwrap()
}

pub fn write_specimen(dir: &Path, name: &str, spec: &QrSpecimen) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, spec.image.to_ppm()).unwrap();
    p
}

/// Deterministic pseudo-random grey raster as PGM bytes.
pub fn noise_pgm(width: usize, height: usize, seed: u32) -> Vec<u8> {
    let mut state = seed;
    let img = alfa_core::image::GrayImage::from_fn(width, height, |_, _| {
        state = state.wrapping_mul(1_103_515_245).wrapping_add(12345);
        (state >> 16) as u8
    });
    img.to_pgm()
}

/// Small model trained in-process on plain and circle specimens.
pub fn small_model(dir: &Path) -> (ForestModel, PathBuf) {
    let styles = ["plain", "circle", "rounded"];
    let rows: Vec<_> = synthetic_urls(15, 15, 77)
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let spec = specimen(&u.url, styles[i % styles.len()], None);
            let a = analyze(&spec.image.to_gray(), &PipelineOptions::default()).unwrap();
            (a.features, u.label)
        })
        .collect();
    let model = train(&rows, TrainParams { n_trees: 20, max_depth: 4, seed: 42 }).unwrap();
    let path = dir.join("model.json");
    save_model(&model, &path).unwrap();
    (model, path)
}
