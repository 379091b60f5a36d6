use super::matching::match_frame;
use super::{average_precision, parse_label_file, parse_pred_file, GroundTruthBox, ParseError, PredBox};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const DEFAULT_CONF_THR: f64 = 0.25;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: u32,
    pub gt_count: usize,
    pub pred_count: usize,
    pub ap50: f64,
    pub ap50_95: f64,
    /// AP at each of [`iou_thresholds`].
    pub ap_by_iou: Vec<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Detector evaluation over a directory pair.
///
/// `classes` holds every class present in the ground truth; the macro
/// means run over those only. Precision, recall and the TP/FP/FN totals
/// use predictions with `conf >= conf_thr` at IoU 0.5, and predictions of
/// classes missing from the ground truth count as false positives.
/// Precision (recall) is 0 when nothing was predicted (nothing exists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    pub conf_thr: f64,
    pub iou_thresholds: Vec<f64>,
    pub map50: f64,
    pub map50_95: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub classes: Vec<ClassReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn txt_stems(dir: &Path) -> Result<BTreeSet<String>, EvalError> {
    let io = |source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "txt") && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string());
            }
        }
    }
    Ok(out)
}

fn read_parsed<T>(
    path: &Path,
    parse: fn(&str) -> Result<Vec<T>, ParseError>,
) -> Result<Vec<T>, EvalError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text).map_err(|source| EvalError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// One frame: file stem, ground truth, predictions.
pub type LoadedFrame = (String, Vec<GroundTruthBox>, Vec<PredBox>);

/// Loads `<stem>.txt` pairs. Frames are the union of stems in both
/// directories, in name order; a missing file on either side is an empty
/// frame.
pub fn load_frames(
    gt_dir: &Path,
    pred_dir: &Path,
) -> Result<Vec<LoadedFrame>, EvalError> {
    let mut stems = txt_stems(gt_dir)?;
    if pred_dir.exists() {
        stems.extend(txt_stems(pred_dir)?);
    }
    stems
        .into_iter()
        .map(|stem| {
            let name = format!("{stem}.txt");
            let gts = read_parsed(&gt_dir.join(&name), parse_label_file)?;
            let preds = read_parsed(&pred_dir.join(&name), parse_pred_file)?;
            Ok((stem, gts, preds))
        })
        .collect()
}

pub fn evaluate(gt_dir: &Path, pred_dir: &Path, conf_thr: f64) -> Result<EvalReport, EvalError> {
    let frames = load_frames(gt_dir, pred_dir)?;
    let frames: Vec<_> = frames.into_iter().map(|(_, g, p)| (g, p)).collect();
    Ok(evaluate_frames(&frames, conf_thr))
}

/// Evaluates in-memory frames, already in the desired fold order.
/// Arithmetic mean, clamped to the inputs' range so that rounding cannot
/// push the mean of equal values past them.
fn mean_within(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (v.iter().sum::<f64>() / v.len() as f64).clamp(lo, hi)
}

pub fn evaluate_frames(frames: &[(Vec<GroundTruthBox>, Vec<PredBox>)], conf_thr: f64) -> EvalReport {
    let thresholds = iou_thresholds();
    let gt_classes: BTreeSet<u32> = frames
        .iter()
        .flat_map(|(g, _)| g.iter().map(|b| b.class_id))
        .collect();

    let mut classes = Vec::new();
    for &class in &gt_classes {
        // (conf, tp flag per threshold) in frame order, then input order
        let mut scored: Vec<(f64, [bool; 10])> = Vec::new();
        let mut gt_count = 0;
        for (gts, preds) in frames {
            let g: Vec<_> = gts.iter().filter(|b| b.class_id == class).copied().collect();
            let p: Vec<_> = preds.iter().filter(|b| b.class_id == class).copied().collect();
            gt_count += g.len();
            let mut flags = vec![[false; 10]; p.len()];
            for (t, &thr) in thresholds.iter().enumerate() {
                let m = match_frame(&p, &g, thr);
                for (i, &tp) in m.pred_tp.iter().enumerate() {
                    flags[i][t] = tp;
                }
            }
            scored.extend(p.iter().map(|b| b.conf).zip(flags));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let ap_by_iou: Vec<f64> = (0..thresholds.len())
            .map(|t| {
                let flags: Vec<bool> = scored.iter().map(|s| s.1[t]).collect();
                average_precision(&flags, gt_count)
            })
            .collect();
        let kept: Vec<_> = scored.iter().filter(|s| s.0 >= conf_thr).collect();
        let tp = kept.iter().filter(|s| s.1[0]).count();
        classes.push(ClassReport {
            class_id: class,
            gt_count,
            pred_count: scored.len(),
            ap50: ap_by_iou[0],
            ap50_95: mean_within(&ap_by_iou),
            ap_by_iou,
            tp,
            fp: kept.len() - tp,
            fn_: gt_count - tp,
        });
    }

    let stray_fp = frames
        .iter()
        .flat_map(|(_, p)| p)
        .filter(|b| !gt_classes.contains(&b.class_id) && b.conf >= conf_thr)
        .count();
    let tp: usize = classes.iter().map(|c| c.tp).sum();
    let fp: usize = classes.iter().map(|c| c.fp).sum::<usize>() + stray_fp;
    let fn_: usize = classes.iter().map(|c| c.fn_).sum();
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let macro_mean = |f: fn(&ClassReport) -> f64| {
        if classes.is_empty() {
            0.0
        } else {
            classes.iter().map(f).sum::<f64>() / classes.len() as f64
        }
    };
    EvalReport {
        frames: frames.len(),
        conf_thr,
        iou_thresholds: thresholds.to_vec(),
        map50: macro_mean(|c| c.ap50),
        map50_95: macro_mean(|c| c.ap50_95),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        tp,
        fp,
        fn_,
        classes,
    }
}

pub fn format_table(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>5} {:>6} {:>6} {:>8} {:>8} {:>5} {:>5} {:>5}", "class", "gt", "preds", "AP50", "AP50-95", "TP", "FP", "FN");
    for c in &r.classes {
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>6} {:>8.6} {:>8.6} {:>5} {:>5} {:>5}",
            c.class_id, c.gt_count, c.pred_count, c.ap50, c.ap50_95, c.tp, c.fp, c.fn_
        );
    }
    let _ = writeln!(s, "frames {}  conf>={}", r.frames, r.conf_thr);
    let _ = writeln!(s, "mAP50 {:.6}  mAP50-95 {:.6}", r.map50, r.map50_95);
    let _ = writeln!(
        s,
        "precision {:.6}  recall {:.6}  (TP {} FP {} FN {})",
        r.precision, r.recall, r.tp, r.fp, r.fn_
    );
    s
}
