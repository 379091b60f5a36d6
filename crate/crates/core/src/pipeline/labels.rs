use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::crops::crop_path;
use super::{csv_rows, field, CropRecord, PipelineError};
use crate::classifier::{LabeledCrop, LabeledCropSet};

pub const LABELS_HEADER: &str = "crop_id,label,annotator,labeled_at_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Damaged,
    Undamaged,
    Skip,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Damaged => "damaged",
            Label::Undamaged => "undamaged",
            Label::Skip => "skip",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "damaged" => Ok(Label::Damaged),
            "undamaged" => Ok(Label::Undamaged),
            "skip" => Ok(Label::Skip),
            _ => Err(format!("unknown label {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub crop_id: String,
    pub label: Label,
    pub annotator: String,
    pub labeled_at_ms: i64,
}

pub fn parse_labels(text: &str) -> Result<Vec<LabelRow>, PipelineError> {
    let file = "labels";
    csv_rows(text, file, LABELS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(LabelRow {
                crop_id: f[0].trim().to_string(),
                label: f[1]
                    .trim()
                    .parse()
                    .map_err(|m: String| PipelineError::parse(file, line, m))?,
                annotator: f[2].trim().to_string(),
                labeled_at_ms: field(file, line, "labeled_at_ms", f[3])?,
            })
        })
        .collect()
}

pub fn format_label_row(row: &LabelRow) -> Result<String, PipelineError> {
    for (name, v) in [("crop_id", &row.crop_id), ("annotator", &row.annotator)] {
        if v.contains([',', '\n', '\r']) {
            return Err(PipelineError::Invalid(format!(
                "{name} {v:?} contains a comma or line break"
            )));
        }
    }
    Ok(format!(
        "{},{},{},{}\n",
        row.crop_id,
        row.label.as_str(),
        row.annotator,
        row.labeled_at_ms
    ))
}

/// Appends rows to a labels file (writing the header into a new or empty
/// file) and syncs it to disk before returning.
pub fn append_labels(path: &Path, rows: &[LabelRow]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&format_label_row(r)?);
    }
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(PipelineError::io(path))?;
    let empty = f.metadata().map_err(PipelineError::io(path))?.len() == 0;
    if empty {
        text.insert_str(0, &format!("{LABELS_HEADER}\n"));
    }
    f.write_all(text.as_bytes()).map_err(PipelineError::io(path))?;
    f.sync_all().map_err(PipelineError::io(path))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub rows: usize,
    /// Rows carrying damaged/undamaged for a known crop, overrides included.
    pub assigned: usize,
    pub skipped: usize,
    pub unknown: usize,
    pub unknown_ids: Vec<String>,
    /// Assigned rows superseded by a later row for the same crop.
    pub overridden: usize,
    pub damaged: usize,
    pub undamaged: usize,
    /// damaged / undamaged; absent when there are no undamaged crops.
    pub ratio: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub set: LabeledCropSet,
    pub report: BalanceReport,
}

/// Joins label rows onto the crop manifest. The last damaged/undamaged row
/// for a crop wins; `skip` rows are counted and ignored; rows naming an
/// unknown crop are collected in the report. The set follows manifest order.
pub fn build_labeled_dataset(
    crops: &[CropRecord],
    crops_dir: &Path,
    rows: &[LabelRow],
) -> LabeledDataset {
    let known: HashMap<&str, usize> = crops
        .iter()
        .enumerate()
        .map(|(i, c)| (c.crop_id.as_str(), i))
        .collect();
    let mut report = BalanceReport {
        rows: rows.len(),
        ..Default::default()
    };
    let mut verdict: BTreeMap<usize, bool> = BTreeMap::new();
    for r in rows {
        let Some(&idx) = known.get(r.crop_id.as_str()) else {
            report.unknown += 1;
            report.unknown_ids.push(r.crop_id.clone());
            continue;
        };
        match r.label {
            Label::Skip => report.skipped += 1,
            Label::Damaged | Label::Undamaged => {
                report.assigned += 1;
                if verdict.insert(idx, r.label == Label::Damaged).is_some() {
                    report.overridden += 1;
                }
            }
        }
    }
    let items: Vec<LabeledCrop> = verdict
        .iter()
        .map(|(&i, &damaged)| LabeledCrop {
            path: crop_path(crops_dir, &crops[i].crop_id),
            damaged,
        })
        .collect();
    let set = LabeledCropSet { items };
    let (damaged, undamaged) = set.class_counts();
    report.damaged = damaged;
    report.undamaged = undamaged;
    report.ratio = (undamaged > 0).then(|| damaged as f64 / undamaged as f64);
    if set.is_empty() {
        report.warnings.push("no labeled crops".into());
    } else if damaged == 0 || undamaged == 0 {
        report.warnings.push("only one class is labeled".into());
    }
    if report.unknown > 0 {
        report
            .warnings
            .push(format!("{} label rows name unknown crops", report.unknown));
    }
    LabeledDataset { set, report }
}
