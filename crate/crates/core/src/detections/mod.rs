//! Detector ground truth and predictions: parsing, IoU, matching, AP/mAP,
//! and k-means anchor boxes.
//!
//! Line grammar (space separated, one box per line, blank lines ignored):
//!
//! ```text
//! class cx cy w h          # ground truth
//! class cx cy w h conf     # prediction
//! ```
//!
//! Coordinates are normalized to the frame, center format.

mod anchors;
mod eval;
mod matching;

pub use anchors::{anchor_kmeans, shape_distance, AnchorError, AnchorSet, DEFAULT_MAX_ITERS};
pub use eval::{
    evaluate, evaluate_frames, format_table, iou_thresholds, load_frames, ClassReport, EvalError,
    EvalReport, LoadedFrame, DEFAULT_CONF_THR,
};
pub use matching::{average_precision, match_frame, FrameMatch};

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredBox {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
}

/// Axis-aligned box as (x0, y0, x1, y1), any unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corners {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Corners {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Corners { x0, y0, x1, y1 }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Corners {
            x0: cx - w / 2.0,
            y0: cy - h / 2.0,
            x1: cx + w / 2.0,
            y1: cy + h / 2.0,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }
}

impl GroundTruthBox {
    pub fn corners(&self) -> Corners {
        Corners::from_center(self.cx, self.cy, self.w, self.h)
    }
}

impl PredBox {
    pub fn corners(&self) -> Corners {
        Corners::from_center(self.cx, self.cy, self.w, self.h)
    }

    pub fn as_gt(&self) -> GroundTruthBox {
        GroundTruthBox {
            class_id: self.class_id,
            cx: self.cx,
            cy: self.cy,
            w: self.w,
            h: self.h,
        }
    }
}

/// Intersection over union; 0 for disjoint or degenerate pairs.
pub fn iou(a: Corners, b: Corners) -> f64 {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    FieldCount { expected: usize, found: usize },
    NotNumeric { field: &'static str, text: String },
    OutOfRange { field: &'static str, value: f64 },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            ParseErrorKind::NotNumeric { field, text } => write!(f, "{field}: not a number: {text:?}"),
            ParseErrorKind::OutOfRange { field, value } => write!(f, "{field} out of range: {value}"),
        }
    }
}

const FIELDS: [&str; 6] = ["class", "cx", "cy", "w", "h", "conf"];

fn parse_fields(line_no: usize, line: &str, n: usize) -> Result<(u32, [f64; 5]), ParseError> {
    let err = |kind| ParseError {
        line: line_no,
        kind,
    };
    let toks: Vec<&str> = line.split_ascii_whitespace().collect();
    if toks.len() != n {
        return Err(err(ParseErrorKind::FieldCount {
            expected: n,
            found: toks.len(),
        }));
    }
    let class_id: u32 = toks[0].parse().map_err(|_| {
        err(ParseErrorKind::NotNumeric {
            field: "class",
            text: toks[0].to_string(),
        })
    })?;
    let mut vals = [0.0; 5];
    for (i, tok) in toks[1..].iter().enumerate() {
        let field = FIELDS[i + 1];
        let v: f64 = tok.parse().map_err(|_| {
            err(ParseErrorKind::NotNumeric {
                field,
                text: tok.to_string(),
            })
        })?;
        let ok = match field {
            "w" | "h" => v > 0.0 && v <= 1.0,
            _ => (0.0..=1.0).contains(&v),
        };
        if !ok {
            return Err(err(ParseErrorKind::OutOfRange { field, value: v }));
        }
        vals[i] = v;
    }
    Ok((class_id, vals))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_label_file(text: &str) -> Result<Vec<GroundTruthBox>, ParseError> {
    data_lines(text)
        .map(|(n, line)| {
            let (class_id, v) = parse_fields(n, line, 5)?;
            Ok(GroundTruthBox {
                class_id,
                cx: v[0],
                cy: v[1],
                w: v[2],
                h: v[3],
            })
        })
        .collect()
}

pub fn parse_pred_file(text: &str) -> Result<Vec<PredBox>, ParseError> {
    data_lines(text)
        .map(|(n, line)| {
            let (class_id, v) = parse_fields(n, line, 6)?;
            Ok(PredBox {
                class_id,
                cx: v[0],
                cy: v[1],
                w: v[2],
                h: v[3],
                conf: v[4],
            })
        })
        .collect()
}
