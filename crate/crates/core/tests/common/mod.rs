#![allow(dead_code)]

pub mod eval_ref;
pub mod fd;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use roadwatch_core::classifier::{train, TrainConfig};
use roadwatch_core::pipeline::{
    build_labeled_dataset, classify_crops, collect_damage_detections, emit_anomalies,
    extract_crops, format_anomaly_line, format_summary, parse_labels, summarize,
    AnomalyThresholds, CropRecord, FrameManifest, GpsTrack, SignPrediction, CROP_MANIFEST,
    DEFAULT_CROP_CONF, DEFAULT_MARGIN,
};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden")
}

pub fn expected(name: &str) -> PathBuf {
    golden_dir().join("expected").join(name)
}

/// Compares `actual` with a checked-in file; `ROADWATCH_BLESS=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = expected(name);
    if std::env::var_os("ROADWATCH_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if want == actual {
        Ok(())
    } else {
        Err(format!("{name} differs from {}:\n--- expected\n{want}--- actual\n{actual}", path.display()))
    }
}

pub fn sign_classes() -> BTreeSet<u32> {
    [0].into()
}

pub struct GoldenOutputs {
    pub crops: Vec<CropRecord>,
    pub crop_manifest: String,
    pub anomalies: String,
    pub summary: String,
    pub below_threshold: usize,
}

pub fn manifest() -> FrameManifest {
    FrameManifest::load(&golden_dir().join("frames/manifest.csv")).unwrap()
}

pub fn track() -> GpsTrack {
    GpsTrack::parse(&std::fs::read_to_string(golden_dir().join("gps.csv")).unwrap()).unwrap()
}

/// Crops, then turns sign probabilities from `classify` into anomaly and
/// summary text.
pub fn run_golden(
    work: &Path,
    classify: impl FnOnce(&[CropRecord], &Path) -> Vec<SignPrediction>,
) -> GoldenOutputs {
    let manifest = manifest();
    let crops_dir = work.join("crops");
    let run = extract_crops(
        &manifest,
        &golden_dir().join("preds"),
        &crops_dir,
        DEFAULT_CROP_CONF,
        DEFAULT_MARGIN,
        Some(&sign_classes()),
    )
    .unwrap();
    let signs = classify(&run.records, &crops_dir);
    let damage =
        collect_damage_detections(&manifest, &golden_dir().join("preds"), &sign_classes()).unwrap();
    let records = emit_anomalies(&damage, &signs, Some(&track()), &AnomalyThresholds::default()).unwrap();
    GoldenOutputs {
        crop_manifest: std::fs::read_to_string(crops_dir.join(CROP_MANIFEST)).unwrap(),
        anomalies: records.iter().map(|r| format_anomaly_line(r) + "\n").collect(),
        summary: format_summary(&summarize(&records)),
        crops: run.records,
        below_threshold: run.below_threshold,
    }
}

/// Full run: labels join, tiny training, classification.
pub fn run_golden_trained(work: &Path) -> GoldenOutputs {
    run_golden(work, |crops, crops_dir| {
        let rows = parse_labels(&std::fs::read_to_string(golden_dir().join("labels.csv")).unwrap()).unwrap();
        let data = build_labeled_dataset(crops, crops_dir, &rows);
        let out = train(&data.set, &TrainConfig::tiny()).unwrap();
        classify_crops(&out.checkpoint, crops, crops_dir, &sign_classes()).unwrap()
    })
}
