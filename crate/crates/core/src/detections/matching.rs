use super::{iou, GroundTruthBox, PredBox};

/// Outcome of matching one frame's predictions of a single class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMatch {
    /// True-positive flag per prediction, in input order.
    pub pred_tp: Vec<bool>,
    pub gt_matched: Vec<bool>,
}

impl FrameMatch {
    pub fn tp(&self) -> usize {
        self.pred_tp.iter().filter(|&&t| t).count()
    }

    pub fn fp(&self) -> usize {
        self.pred_tp.len() - self.tp()
    }

    pub fn fn_(&self) -> usize {
        self.gt_matched.iter().filter(|&&m| !m).count()
    }
}

/// Indices of `preds` by confidence descending; equal confidences keep
/// input order.
pub(crate) fn conf_order(preds: &[PredBox]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&a, &b| preds[b].conf.total_cmp(&preds[a].conf));
    idx
}

/// Greedy one-to-one matching. Predictions are visited by confidence
/// descending; each takes the unmatched ground-truth box with the highest
/// IoU, provided it reaches `iou_thr` (ties go to the earlier box).
pub fn match_frame(preds: &[PredBox], gts: &[GroundTruthBox], iou_thr: f64) -> FrameMatch {
    let mut pred_tp = vec![false; preds.len()];
    let mut gt_matched = vec![false; gts.len()];
    let gt_corners: Vec<_> = gts.iter().map(|g| g.corners()).collect();
    for pi in conf_order(preds) {
        let pc = preds[pi].corners();
        let mut best: Option<(usize, f64)> = None;
        for (gi, gc) in gt_corners.iter().enumerate() {
            if gt_matched[gi] {
                continue;
            }
            let v = iou(pc, *gc);
            if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            gt_matched[gi] = true;
            pred_tp[pi] = true;
        }
    }
    FrameMatch {
        pred_tp,
        gt_matched,
    }
}

/// All-point interpolated average precision. `tp_flags` must already be in
/// confidence-descending order.
///
/// With no ground truth the AP is 1.0 if there are also no predictions and
/// 0.0 otherwise.
pub fn average_precision(tp_flags: &[bool], total_gt: usize) -> f64 {
    if total_gt == 0 {
        return if tp_flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut precision = Vec::with_capacity(tp_flags.len());
    let mut recall = Vec::with_capacity(tp_flags.len());
    let mut tp = 0usize;
    for (i, &flag) in tp_flags.iter().enumerate() {
        if flag {
            tp += 1;
        }
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / total_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ap
}
