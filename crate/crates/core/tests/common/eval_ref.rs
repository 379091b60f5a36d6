#![allow(dead_code)]

//! Brute-force detection evaluator written from the definitions, without
//! sharing code with the library.

use proptest::prelude::*;
use roadwatch_core::detections::{GroundTruthBox, PredBox};

pub fn gt(class_id: u32, cx: f64, cy: f64, w: f64, h: f64) -> GroundTruthBox {
    GroundTruthBox { class_id, cx, cy, w, h }
}

pub fn pred(class_id: u32, cx: f64, cy: f64, w: f64, h: f64, conf: f64) -> PredBox {
    PredBox { class_id, cx, cy, w, h, conf }
}

pub fn ref_iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    let (ax0, ax1) = (a.0 - a.2 / 2.0, a.0 + a.2 / 2.0);
    let (ay0, ay1) = (a.1 - a.3 / 2.0, a.1 + a.3 / 2.0);
    let (bx0, bx1) = (b.0 - b.2 / 2.0, b.0 + b.2 / 2.0);
    let (by0, by1) = (b.1 - b.3 / 2.0, b.1 + b.3 / 2.0);
    let ix = if ax1 < bx1 { ax1 } else { bx1 } - if ax0 > bx0 { ax0 } else { bx0 };
    let iy = if ay1 < by1 { ay1 } else { by1 } - if ay0 > by0 { ay0 } else { by0 };
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.2 * a.3 + b.2 * b.3 - inter)
}

pub fn geom_g(b: &GroundTruthBox) -> (f64, f64, f64, f64) {
    (b.cx, b.cy, b.w, b.h)
}

pub fn geom_p(b: &PredBox) -> (f64, f64, f64, f64) {
    (b.cx, b.cy, b.w, b.h)
}

/// AP as the sum over recall increments of the best precision reachable at
/// that recall or beyond.
pub fn ref_ap(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut pts = Vec::new();
    let mut tp = 0.0;
    for (i, f) in flags.iter().enumerate() {
        if *f {
            tp += 1.0;
        }
        pts.push((tp / (i as f64 + 1.0), tp / n_gt as f64));
    }
    let mut ap = 0.0;
    let mut last_r = 0.0;
    for i in 0..pts.len() {
        let r = pts[i].1;
        if r > last_r {
            let best = pts.iter().filter(|p| p.1 >= r).map(|p| p.0).fold(0.0, f64::max);
            ap += (r - last_r) * best;
            last_r = r;
        }
    }
    ap
}

pub type Frame = (Vec<GroundTruthBox>, Vec<PredBox>);

/// Returns (per-class ap per threshold, tp, fp, fn at conf_thr).
pub fn ref_evaluate(frames: &[Frame], conf_thr: f64) -> (Vec<(u32, Vec<f64>)>, usize, usize, usize) {
    let mut classes: Vec<u32> = frames.iter().flat_map(|f| f.0.iter().map(|b| b.class_id)).collect();
    classes.sort();
    classes.dedup();
    let mut out = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for &c in &classes {
        let mut aps = Vec::new();
        for t in 0..10 {
            let thr = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95][t];
            // (conf, global sequence, tp)
            let mut all: Vec<(f64, usize, bool)> = Vec::new();
            let mut n_gt = 0;
            let mut seq = 0;
            for (gts, preds) in frames {
                let g: Vec<&GroundTruthBox> = gts.iter().filter(|b| b.class_id == c).collect();
                n_gt += g.len();
                let mut p: Vec<(usize, &PredBox)> =
                    preds.iter().filter(|b| b.class_id == c).enumerate().collect();
                // insertion sort, stable, by conf descending
                for i in 1..p.len() {
                    let mut j = i;
                    while j > 0 && p[j - 1].1.conf < p[j].1.conf {
                        p.swap(j - 1, j);
                        j -= 1;
                    }
                }
                let mut used = vec![false; g.len()];
                let mut results = vec![false; p.len()];
                for (orig, pb) in &p {
                    let mut best = None;
                    let mut best_v = -1.0;
                    for (gi, gb) in g.iter().enumerate() {
                        let v = ref_iou(geom_p(pb), geom_g(gb));
                        if !used[gi] && v >= thr && v > best_v {
                            best = Some(gi);
                            best_v = v;
                        }
                    }
                    if let Some(gi) = best {
                        used[gi] = true;
                        results[*orig] = true;
                    }
                }
                let pc: Vec<&PredBox> = preds.iter().filter(|b| b.class_id == c).collect();
                for (i, pb) in pc.iter().enumerate() {
                    all.push((pb.conf, seq, results[i]));
                    seq += 1;
                }
            }
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let flags: Vec<bool> = all.iter().map(|x| x.2).collect();
            aps.push(ref_ap(&flags, n_gt));
            if t == 0 {
                let tp = all.iter().filter(|x| x.0 >= conf_thr && x.2).count();
                let fp = all.iter().filter(|x| x.0 >= conf_thr && !x.2).count();
                tp_all += tp;
                fp_all += fp;
                fn_all += n_gt - tp;
            }
        }
        out.push((c, aps));
    }
    fp_all += frames
        .iter()
        .flat_map(|f| &f.1)
        .filter(|b| !classes.contains(&b.class_id) && b.conf >= conf_thr)
        .count();
    (out, tp_all, fp_all, fn_all)
}

pub fn arb_geom() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.1f64..0.9, 0.1f64..0.9, 0.05f64..0.5, 0.05f64..0.5)
}

pub fn arb_gt(classes: u32) -> impl Strategy<Value = GroundTruthBox> {
    (0..classes, arb_geom()).prop_map(|(c, g)| gt(c, g.0, g.1, g.2, g.3))
}

pub fn arb_pred(classes: u32) -> impl Strategy<Value = PredBox> {
    // coarse confidences so that ties occur
    (0..classes, arb_geom(), 1u32..10).prop_map(|(c, g, q)| pred(c, g.0, g.1, g.2, g.3, q as f64 / 10.0))
}

/// Predictions that are jittered copies of ground-truth boxes, so many
/// of them match at the lower thresholds.
pub fn arb_frame() -> impl Strategy<Value = Frame> {
    (
        prop::collection::vec(arb_gt(2), 0..=5),
        prop::collection::vec(arb_pred(3), 0..=2),
        prop::collection::vec((0usize..5, -0.03f64..0.03, -0.03f64..0.03, 0.9f64..1.1, 1u32..10), 0..=3),
    )
        .prop_map(|(gts, mut preds, near)| {
            for (i, dx, dy, s, q) in near {
                if let Some(g) = gts.get(i % gts.len().max(1)) {
                    preds.push(pred(g.class_id, g.cx + dx, g.cy + dy, (g.w * s).min(1.0), (g.h * s).min(1.0), q as f64 / 10.0));
                }
            }
            preds.truncate(5);
            (gts, preds)
        })
}

