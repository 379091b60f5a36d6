//! Frames plus detector output in; crops, a labeled crop set, geotagged
//! anomaly records and a summary out.
//!
//! All tabular inputs are plain comma-separated text with a fixed header
//! line and no quoting.

mod anomalies;
mod crops;
mod gps;
mod labels;
mod manifest;
mod summary;

pub use anomalies::{
    classify_crops, classify_sign_detections, collect_damage_detections, emit_anomalies, format_anomaly_line, parse_anomalies,
    read_anomalies, write_anomalies, AnomalyKind, AnomalyRecord, AnomalyThresholds,
    DamageDetection, SignPrediction,
};
pub use crops::{
    crop_id, crop_path, crop_rect, extract_crops, for_each_crop, parse_crop_manifest, read_crop_manifest,
    write_crop_manifest, CropRecord, CropRun, CROP_MANIFEST, CROP_MANIFEST_HEADER,
    DEFAULT_CROP_CONF, DEFAULT_MARGIN,
};
pub use gps::{geo_interpolate, GpsPoint, GpsTrack, DEFAULT_GPS_TOLERANCE_MS};
pub use labels::{
    append_labels, build_labeled_dataset, format_label_row, parse_labels, BalanceReport, Label,
    LabelRow, LabeledDataset, LABELS_HEADER,
};
pub use manifest::{FrameEntry, FrameManifest};
pub use summary::{format_summary, summarize, Summary};

use std::path::{Path, PathBuf};

use crate::classifier::ClassifierError;
use crate::detections::ParseError as BoxParseError;
use crate::imaging::ImagingError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{file}: line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Detections {
        path: PathBuf,
        source: BoxParseError,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        source: ImagingError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    pub(crate) fn parse(file: &str, line: usize, message: impl Into<String>) -> Self {
        PipelineError::Parse {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(PipelineError::io(path))
}

/// Splits comma-separated text after checking the header. Yields
/// (1-based line number, fields); blank lines are skipped.
pub(crate) fn csv_rows<'a>(
    text: &'a str,
    file: &str,
    header: &str,
) -> Result<Vec<(usize, Vec<&'a str>)>, PipelineError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == header => {}
        Some((_, h)) => {
            return Err(PipelineError::parse(
                file,
                1,
                format!("expected header {header:?}, found {h:?}"),
            ))
        }
        None => return Err(PipelineError::parse(file, 1, "missing header")),
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(PipelineError::parse(
                file,
                i + 1,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        rows.push((i + 1, fields));
    }
    Ok(rows)
}

pub(crate) fn field<T: std::str::FromStr>(
    file: &str,
    line: usize,
    name: &str,
    text: &str,
) -> Result<T, PipelineError> {
    text.trim()
        .parse()
        .map_err(|_| PipelineError::parse(file, line, format!("{name}: invalid value {text:?}")))
}
