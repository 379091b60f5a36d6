use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use roadwatch_core::classifier::{emit_history_csv, load_model, predict as predict_prob, save_model, train as fit, TrainConfig};
use roadwatch_core::detections::{anchor_kmeans, evaluate, format_table, parse_label_file};
use roadwatch_core::imaging::read_ppm;
use roadwatch_core::pipeline::{
    build_labeled_dataset, classify_sign_detections, collect_damage_detections, crop_path, emit_anomalies,
    extract_crops, format_summary, parse_labels, read_crop_manifest, summarize, write_anomalies,
    AnomalyThresholds, FrameManifest, GpsTrack, Label, LabelRow, CROP_MANIFEST,
};
use roadwatch_service::LabelStore;

use crate::Failure;

fn check_unit(name: &str, v: f64) -> Result<(), Failure> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} {v} must be in [0, 1]")))
    }
}

fn check_margin(v: f64) -> Result<(), Failure> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--margin {v} must be >= 0")))
    }
}

fn check_threshold(v: f64) -> Result<(), Failure> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--threshold {v} must be in (0, 1)")))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Op(format!("{}: {e}", path.display())))
}

pub fn eval(gt: &Path, pred: &Path, conf: f64, out: &Path) -> Result<(), Failure> {
    check_unit("conf", conf)?;
    let report = evaluate(gt, pred, conf)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    std::fs::write(out, json).map_err(|e| Failure::Op(format!("{}: {e}", out.display())))?;
    print!("{}", format_table(&report));
    Ok(())
}

pub fn crops(
    manifest: &Path,
    pred: &Path,
    out: &Path,
    conf: f64,
    margin: f64,
    classes: Option<&BTreeSet<u32>>,
) -> Result<(), Failure> {
    check_unit("conf", conf)?;
    check_margin(margin)?;
    let manifest = FrameManifest::load(manifest)?;
    let run = extract_crops(&manifest, pred, out, conf, margin, classes)?;
    for msg in &run.skipped_empty {
        eprintln!("skipped: {msg}");
    }
    eprintln!(
        "{} crops written to {} ({} below conf {conf}, {} duplicates, {} empty)",
        run.records.len(),
        out.display(),
        run.below_threshold,
        run.duplicates,
        run.skipped_empty.len()
    );
    Ok(())
}

pub fn anchors(gt: &Path, k: usize, max_iters: usize) -> Result<(), Failure> {
    if k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(gt)
        .map_err(|e| Failure::Op(format!("{}: {e}", gt.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    let mut shapes = Vec::new();
    for f in &files {
        let boxes = parse_label_file(&read(f)?).map_err(|e| Failure::Op(format!("{}: {e}", f.display())))?;
        shapes.extend(boxes.iter().map(|b| (b.w, b.h)));
    }
    if shapes.len() < k {
        return Err(Failure::Op(format!("{} boxes in {}, fewer than k = {k}", shapes.len(), gt.display())));
    }
    let set = anchor_kmeans(&shapes, k, max_iters)?;
    eprintln!(
        "{} boxes, {} iterations, final cost {:.6}",
        shapes.len(),
        set.iterations,
        set.cost_history.last().copied().unwrap_or(0.0)
    );
    for (w, h) in &set.centroids {
        println!("{w:.6} {h:.6}");
    }
    Ok(())
}

pub fn train(
    data: &Path,
    labels: &Path,
    config: &Path,
    out: &Path,
    history: &Path,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let mut cfg = TrainConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let crops = read_crop_manifest(&data.join(CROP_MANIFEST))?;
    let rows = parse_labels(&read(labels)?).map_err(|e| Failure::Op(format!("{}: {e}", labels.display())))?;
    let ds = build_labeled_dataset(&crops, data, &rows);
    let r = &ds.report;
    eprintln!(
        "{} label rows: {} damaged, {} undamaged, {} skipped, {} unknown ids",
        r.rows, r.damaged, r.undamaged, r.skipped, r.unknown
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    let result = fit(&ds.set, &cfg)?;
    for m in &result.history {
        eprintln!(
            "epoch {}/{}: loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            m.epoch, cfg.epochs, m.train.loss, m.train.accuracy, m.val.loss, m.val.accuracy
        );
    }
    save_model(&result.checkpoint, out)?;
    emit_history_csv(&result.history, history)?;
    eprintln!("model written to {}, history to {}", out.display(), history.display());
    Ok(())
}

pub fn predict(model: &Path, inputs: &[PathBuf], threshold: Option<f64>) -> Result<(), Failure> {
    if let Some(t) = threshold {
        check_threshold(t)?;
    }
    let ckpt = load_model(model)?;
    let thr = threshold.unwrap_or(ckpt.config.threshold);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for path in inputs {
        let img = read_ppm(path).map_err(|e| Failure::Op(format!("{}: {e}", path.display())))?;
        let p = predict_prob(&ckpt, &img)?;
        let verdict = if p >= thr { "damaged" } else { "undamaged" };
        writeln!(out, "{} {p:.6} {verdict}", path.display())?;
    }
    Ok(())
}

pub struct AnomalyJob<'a> {
    pub manifest: &'a Path,
    pub pred: &'a Path,
    pub model: &'a Path,
    pub gps: &'a Path,
    pub out: &'a Path,
    pub sign_classes: BTreeSet<u32>,
    pub conf: f64,
    pub margin: f64,
    pub threshold: Option<f64>,
}

pub fn anomalies(job: &AnomalyJob) -> Result<(), Failure> {
    check_unit("conf", job.conf)?;
    check_margin(job.margin)?;
    if let Some(t) = job.threshold {
        check_threshold(t)?;
    }
    let manifest = FrameManifest::load(job.manifest)?;
    let track = GpsTrack::parse(&read(job.gps)?).map_err(|e| Failure::Op(format!("{}: {e}", job.gps.display())))?;
    let ckpt = load_model(job.model)?;
    let signs = classify_sign_detections(&ckpt, &manifest, job.pred, job.conf, job.margin, &job.sign_classes)?;
    let damage = collect_damage_detections(&manifest, job.pred, &job.sign_classes)?;
    let th = AnomalyThresholds {
        detector_conf: job.conf,
        classifier: job.threshold.unwrap_or(ckpt.config.threshold),
        ..AnomalyThresholds::default()
    };
    let records = emit_anomalies(&damage, &signs, Some(&track), &th)?;
    write_anomalies(job.out, &records)?;
    eprintln!("{} signs classified, {} damage detections", signs.len(), damage.len());
    print!("{}", format_summary(&summarize(&records)));
    Ok(())
}

pub fn serve(root: &Path, addr: SocketAddr) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(roadwatch_service::serve(root, addr))?;
    Ok(())
}

/// Walks the crops with no damaged/undamaged label yet, in manifest order.
/// Reads one key per line: d, u, s, or q to stop.
pub fn label(data: &Path, labels: &Path, annotator: &str) -> Result<(), Failure> {
    let crops = read_crop_manifest(&data.join(CROP_MANIFEST))?;
    let store = LabelStore::open(labels)?;
    let index = store.snapshot();
    let queue: Vec<_> = crops
        .iter()
        .filter(|c| !matches!(index.label_of(&c.crop_id), Some(Label::Damaged | Label::Undamaged)))
        .collect();
    eprintln!("{} of {} crops to label (d = damaged, u = undamaged, s = skip, q = quit)", queue.len(), crops.len());
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut done = 0;
    'queue: for (i, c) in queue.iter().enumerate() {
        println!(
            "[{}/{}] {}  frame {} class {} conf {:.3}",
            i + 1,
            queue.len(),
            crop_path(data, &c.crop_id).display(),
            c.frame,
            c.class_id,
            c.conf
        );
        let label = loop {
            eprint!("label> ");
            let Some(line) = lines.next() else { break 'queue };
            match line?.trim() {
                "d" => break Label::Damaged,
                "u" => break Label::Undamaged,
                "s" => break Label::Skip,
                "q" => break 'queue,
                other => eprintln!("unknown key {other:?}; use d, u, s or q"),
            }
        };
        let labeled_at_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        store.append(LabelRow {
            crop_id: c.crop_id.clone(),
            label,
            annotator: annotator.to_string(),
            labeled_at_ms,
        })?;
        done += 1;
    }
    eprintln!("{done} labels appended to {}", labels.display());
    Ok(())
}
