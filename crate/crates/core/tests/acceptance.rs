//! Acceptance suite. Runs every criterion in order and prints one line per
//! criterion; exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::eval_ref::{arb_frame, ref_evaluate};
use common::fd::{layer_errors, network_error};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadwatch_core::classifier::{
    build_damagenet, load_model, save_model, split_dataset, train, LabeledCrop, LabeledCropSet,
    ModelCheckpoint, TrainConfig, FORMAT_VERSION,
};
use roadwatch_core::detections::{
    average_precision, evaluate_frames, GroundTruthBox, PredBox, parse_label_file, parse_pred_file, ParseErrorKind,
};
use roadwatch_core::imaging::{decode_ppm, encode_png_stored, encode_ppm, write_ppm, ImagingError};
use roadwatch_core::loss::{bce_with_logits, sigmoid_focal_ce, FocalConfig};
use roadwatch_core::nn::{init_params, LayerSpec};
use roadwatch_core::pipeline::{
    parse_anomalies, parse_crop_manifest, parse_labels, FrameManifest, GpsTrack, PipelineError,
};
use roadwatch_core::synthetic::sign_crops;
use roadwatch_core::ImageRGB8;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let el = t.elapsed();
    ensure(el < limit, || format!("took {el:.1?}, limit {limit:?}"))
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for (name, err) in layer_errors() {
        ensure(err < 1e-4, || format!("{name} relative error {err:.3e}"))?;
        worst = worst.max(err);
    }
    let (net, n) = network_error();
    ensure(net < 1e-3, || format!("end-to-end relative error {net:.3e}"))?;
    within(t, Duration::from_secs(60))?;
    Ok(format!("worst layer {worst:.2e}, end-to-end {net:.2e} over {n} params"))
}

fn focal_identities() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let half = FocalConfig { alpha: 0.5, gamma: 0.0, ..FocalConfig::default() };
    let mut worst_id = 0.0f64;
    let mut worst_fd = 0.0f64;
    for _ in 0..10_000 {
        let z: f64 = r.random_range(-15.0..15.0);
        let y: f64 = if r.random::<bool>() { 1.0 } else { 0.0 };
        let (f, _) = sigmoid_focal_ce(z, y, &half);
        worst_id = worst_id.max((f - 0.5 * bce_with_logits(z, y).0).abs());
        for gamma in [0.0, 1.0, 2.0, 5.0] {
            let cfg = FocalConfig { gamma, ..FocalConfig::default() };
            let h = 1e-5;
            let (_, g) = sigmoid_focal_ce(z, y, &cfg);
            let num = (sigmoid_focal_ce(z + h, y, &cfg).0 - sigmoid_focal_ce(z - h, y, &cfg).0) / (2.0 * h);
            worst_fd = worst_fd.max((g - num).abs());
        }
    }
    ensure(worst_id < 1e-9, || format!("focal vs half BCE off by {worst_id:.3e}"))?;
    ensure(worst_fd < 1e-6, || format!("gradient off finite differences by {worst_fd:.3e}"))?;
    let (v, _) = sigmoid_focal_ce(9f64.ln(), 1.0, &FocalConfig::default());
    ensure((v - 2.6340e-4).abs() < 1e-8, || format!("p=0.9 case gives {v:.6e}"))?;
    Ok(format!("identity {worst_id:.1e}, fd {worst_fd:.1e}, p=0.9 case {v:.4e}"))
}

fn architecture() -> Outcome {
    let spec = build_damagenet(150).map_err(|e| e.to_string())?;
    let want = vec![
        LayerSpec::conv3x3(32),
        LayerSpec::Relu,
        LayerSpec::maxpool2(),
        LayerSpec::conv3x3(64),
        LayerSpec::Relu,
        LayerSpec::maxpool2(),
        LayerSpec::conv3x3(128),
        LayerSpec::Relu,
        LayerSpec::maxpool2(),
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 512 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Dense { units: 1 },
        LayerSpec::Sigmoid,
    ];
    ensure(spec.layers == want, || format!("layer sequence {:?}", spec.layers))?;
    ensure(spec.input_shape == [150, 150, 3], || format!("input {:?}", spec.input_shape))?;
    let report = spec.shape_infer().map_err(|e| e.to_string())?;
    ensure(report.output_shapes[9] == vec![36_992], || format!("flatten {:?}", report.output_shapes[9]))?;
    ensure(report.param_count == 19_034_177, || format!("param count {}", report.param_count))?;

    let ckpt = ModelCheckpoint {
        format_version: FORMAT_VERSION,
        params: init_params(&spec, 42).map_err(|e| e.to_string())?,
        spec,
        config: TrainConfig::default(),
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_model(&ckpt, a.path().join("m.rwm")).map_err(|e| e.to_string())?;
    let loaded = load_model(a.path().join("m.rwm")).map_err(|e| e.to_string())?;
    ensure(loaded == ckpt, || "loaded checkpoint differs".into())?;
    save_model(&loaded, b.path().join("m.rwm")).map_err(|e| e.to_string())?;
    for name in ["m.rwm", "m.weights.bin"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        ensure(x == std::fs::read(b.path().join(name)).unwrap(), || format!("{name} not bit-identical"))?;
    }
    let blob = std::fs::metadata(a.path().join("m.weights.bin")).unwrap().len();
    ensure(blob == 4 * 19_034_177, || format!("blob length {blob}"))?;
    Ok(format!("15 layers, flatten 36992, {} params, blob {blob} bytes", report.param_count))
}

fn metric_oracle() -> Outcome {
    let t = Instant::now();
    let mut runner = TestRunner::new_with_rng(Config::default(), proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    let strat = (proptest::collection::vec(arb_frame(), 1..=3), 0.0f64..1.0);
    for case in 0..200 {
        let (frames, conf_thr) = strat.new_tree(&mut runner).unwrap().current();
        let r = evaluate_frames(&frames, conf_thr);
        let (classes, tp, fp, fn_) = ref_evaluate(&frames, conf_thr);
        ensure(r.classes.len() == classes.len(), || format!("case {case}: class count"))?;
        for (got, (cid, aps)) in r.classes.iter().zip(&classes) {
            for (x, y) in got.ap_by_iou.iter().zip(aps) {
                ensure((x - y).abs() < 1e-9, || format!("case {case}: class {cid} AP {x} vs {y}"))?;
            }
        }
        ensure((r.tp, r.fp, r.fn_) == (tp, fp, fn_), || format!("case {case}: counts"))?;
        let n = classes.len().max(1) as f64;
        let m50 = classes.iter().map(|c| c.1[0]).sum::<f64>() / n;
        let m5095 = classes.iter().map(|c| c.1.iter().sum::<f64>() / 10.0).sum::<f64>() / n;
        ensure((r.map50 - m50).abs() < 1e-9 && (r.map50_95 - m5095).abs() < 1e-9, || format!("case {case}: mAP"))?;
        ensure(r.map50 >= r.map50_95, || format!("case {case}: mAP50 {} < mAP50-95 {}", r.map50, r.map50_95))?;
    }
    // two ground truths; predictions in confidence order hit, miss, hit
    let ap = average_precision(&[true, false, true], 2);
    ensure(ap == 0.5 * 1.0 + 0.5 * (2.0 / 3.0), || format!("hand case AP {ap}"))?;
    let gts = vec![
        GroundTruthBox { class_id: 0, cx: 0.25, cy: 0.25, w: 0.2, h: 0.2 },
        GroundTruthBox { class_id: 0, cx: 0.75, cy: 0.75, w: 0.2, h: 0.2 },
    ];
    let preds = vec![
        PredBox { class_id: 0, cx: 0.25, cy: 0.25, w: 0.2, h: 0.2, conf: 0.9 },
        PredBox { class_id: 0, cx: 0.75, cy: 0.25, w: 0.2, h: 0.2, conf: 0.8 },
        PredBox { class_id: 0, cx: 0.75, cy: 0.75, w: 0.2, h: 0.2, conf: 0.7 },
    ];
    let report = evaluate_frames(&[(gts, preds)], 0.25);
    ensure(report.map50 == ap, || format!("evaluate gives AP50 {}", report.map50))?;
    within(t, Duration::from_secs(30))?;
    Ok(format!("200 datasets agree, hand case AP {ap:.4}"))
}

fn overfit() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let items = sign_crops(24, 48, 42)
        .into_iter()
        .enumerate()
        .map(|(i, (img, damaged))| {
            let path = dir.path().join(format!("crop_{i:02}.ppm"));
            write_ppm(&img, &path).unwrap();
            LabeledCrop { path, damaged }
        })
        .collect();
    let set = LabeledCropSet { items };
    let cfg = TrainConfig::tiny();
    ensure(cfg.epochs == 20 && cfg.batch_size == 32 && cfg.input_size == 48 && cfg.seed == 42, || format!("{cfg:?}"))?;
    ensure(cfg.augment.cutout_size > 0 && cfg.augment.cutout_prob > 0.0 && cfg.augment.rotation_deg > 0.0, || "augmentation disabled".into())?;
    let a = train(&set, &cfg).map_err(|e| e.to_string())?;
    let b = train(&set, &cfg).map_err(|e| e.to_string())?;
    ensure(a.checkpoint == b.checkpoint && a.history == b.history, || "two seed-42 runs differ".into())?;
    let last = a.history.last().unwrap();
    let mut losses = vec![a.initial_train.loss];
    losses.extend(a.history.iter().map(|h| h.train.loss));
    let dec = (0..5).filter(|&i| losses[i + 1] < losses[i]).count();
    let detail = format!(
        "train acc {:.3}, val acc {:.3}, loss {:.4} -> {:.4}, {dec}/5 early decreases",
        last.train.accuracy, last.val.accuracy, losses[0], last.train.loss
    );
    ensure(last.train.accuracy >= 0.95, || detail.clone())?;
    ensure(last.val.accuracy >= 0.9, || detail.clone())?;
    ensure(dec >= 4, || detail.clone())?;
    within(t, Duration::from_secs(300))?;
    Ok(detail)
}

fn split_arithmetic() -> Outcome {
    let set = LabeledCropSet {
        items: (0..249)
            .map(|i| LabeledCrop { path: format!("{i}.ppm").into(), damaged: i < 203 })
            .collect(),
    };
    let (tr, va) = split_dataset(&set, 0.8, 42).map_err(|e| e.to_string())?;
    ensure((tr.len(), va.len()) == (199, 50), || format!("{} / {}", tr.len(), va.len()))?;
    let mut all: Vec<_> = tr.items.iter().chain(&va.items).map(|c| c.path.clone()).collect();
    all.sort();
    all.dedup();
    ensure(all.len() == 249, || "split is not disjoint and exhaustive".into())?;
    Ok("249 -> 199 / 50".into())
}

fn golden_run() -> Outcome {
    let t = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let x = common::run_golden_trained(a.path());
    let y = common::run_golden_trained(b.path());
    ensure(x.crop_manifest == y.crop_manifest, || "crop manifest differs between runs".into())?;
    ensure(x.anomalies == y.anomalies, || "anomalies differ between runs".into())?;
    ensure(x.summary == y.summary, || "summary differs between runs".into())?;
    common::check_golden("crops.csv", &x.crop_manifest)?;
    common::check_golden("anomalies.txt", &x.anomalies)?;
    common::check_golden("summary.txt", &x.summary)?;
    within(t, Duration::from_secs(360))?;
    let n = parse_anomalies(&x.anomalies).map_err(|e| e.to_string())?.len();
    Ok(format!("{} crops, {n} anomalies, outputs match golden files", x.crops.len()))
}

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/malformed").join(name)).unwrap()
}

fn text(name: &str) -> String {
    String::from_utf8(fixture(name)).unwrap()
}

fn pipeline_parse_line(e: PipelineError) -> Option<usize> {
    match e {
        PipelineError::Parse { line, .. } => Some(line),
        _ => None,
    }
}

fn format_robustness() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let random_image = |r: &mut ChaCha8Rng, max: usize| {
        let (w, h) = (r.random_range(1..=max), r.random_range(1..=max));
        ImageRGB8::new(w, h, (0..w * h * 3).map(|_| r.random()).collect()).unwrap()
    };
    for i in 0..1000 {
        let img = random_image(&mut r, 24);
        let back = decode_ppm(&encode_ppm(&img)).map_err(|e| format!("image {i}: {e}"))?;
        ensure(back == img, || format!("PPM round trip {i} differs"))?;
    }
    for i in 0..100 {
        let img = random_image(&mut r, 40);
        let bytes = encode_png_stored(&img);
        let mut reader = png::Decoder::new(std::io::Cursor::new(&bytes[..]))
            .read_info()
            .map_err(|e| format!("png {i}: {e}"))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).map_err(|e| format!("png {i}: {e}"))?;
        ensure(info.color_type == png::ColorType::Rgb && info.bit_depth == png::BitDepth::Eight, || "png type".into())?;
        ensure(&buf[..info.buffer_size()] == img.data(), || format!("png {i} pixels differ"))?;
    }

    type Check = Box<dyn Fn() -> bool>;
    let cases: Vec<(&str, Check)> = vec![
        ("bad_magic.ppm", Box::new(|| matches!(decode_ppm(&fixture("bad_magic.ppm")), Err(ImagingError::BadMagic)))),
        ("empty.ppm", Box::new(|| matches!(decode_ppm(&fixture("empty.ppm")), Err(ImagingError::BadMagic)))),
        ("truncated.ppm", Box::new(|| matches!(decode_ppm(&fixture("truncated.ppm")), Err(ImagingError::Truncated { expected: 12, found: 3 })))),
        ("maxval_16bit.ppm", Box::new(|| matches!(decode_ppm(&fixture("maxval_16bit.ppm")), Err(ImagingError::UnsupportedMaxval(65535))))),
        ("bad_header.ppm", Box::new(|| matches!(decode_ppm(&fixture("bad_header.ppm")), Err(ImagingError::MalformedHeader(_))))),
        ("label_field_count.txt", Box::new(|| {
            parse_label_file(&text("label_field_count.txt")).is_err_and(|e| e.line == 1 && e.kind == ParseErrorKind::FieldCount { expected: 5, found: 4 })
        })),
        ("label_not_numeric.txt", Box::new(|| {
            parse_label_file(&text("label_not_numeric.txt")).is_err_and(|e| e.line == 2 && matches!(e.kind, ParseErrorKind::NotNumeric { field: "cy", .. }))
        })),
        ("label_out_of_range.txt", Box::new(|| {
            parse_label_file(&text("label_out_of_range.txt")).is_err_and(|e| e.line == 3 && matches!(e.kind, ParseErrorKind::OutOfRange { field: "cx", .. }))
        })),
        ("pred_field_count.txt", Box::new(|| {
            parse_pred_file(&text("pred_field_count.txt")).is_err_and(|e| e.line == 1 && e.kind == ParseErrorKind::FieldCount { expected: 6, found: 5 })
        })),
        ("crops_field_count.csv", Box::new(|| parse_crop_manifest(&text("crops_field_count.csv")).map_err(pipeline_parse_line) == Err(Some(2)))),
        ("labels_field_count.csv", Box::new(|| parse_labels(&text("labels_field_count.csv")).map_err(pipeline_parse_line) == Err(Some(2)))),
        ("gps_field_count.csv", Box::new(|| GpsTrack::parse(&text("gps_field_count.csv")).map_err(pipeline_parse_line) == Err(Some(3)))),
        ("manifest_bad_header.csv", Box::new(|| FrameManifest::parse(&text("manifest_bad_header.csv"), ".").map_err(pipeline_parse_line) == Err(Some(1)))),
        ("anomalies_missing_key.txt", Box::new(|| parse_anomalies(&text("anomalies_missing_key.txt")).map_err(pipeline_parse_line) == Err(Some(1)))),
        ("model_version_99.rwm", Box::new(|| {
            let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/malformed/model_version_99.rwm");
            matches!(load_model(p), Err(roadwatch_core::classifier::ClassifierError::ModelFormat(_)))
        })),
    ];
    let n = cases.len();
    for (name, check) in cases {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(true) => {}
            Ok(false) => return Err(format!("{name}: wrong error")),
            Err(_) => return Err(format!("{name}: panicked")),
        }
    }
    Ok(format!("1000 PPM round trips, 100 PNG decodes, {n} malformed fixtures"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient correctness", gradients),
        ("focal-loss identities", focal_identities),
        ("architecture fidelity", architecture),
        ("metric oracle equivalence", metric_oracle),
        ("overfit smoke test", overfit),
        ("split arithmetic", split_arithmetic),
        ("end-to-end golden run", golden_run),
        ("format robustness", format_robustness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let el = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({el:.1} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({el:.1} s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
