use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::manifest::frame_stem;
use super::{csv_rows, field, read_text, FrameManifest, PipelineError};
use crate::detections::{parse_pred_file, PredBox};
use crate::imaging::{crop, read_ppm, write_ppm, ImageRGB8, ImagingError, PixelRect};

pub const DEFAULT_MARGIN: f64 = 0.10;
pub const DEFAULT_CROP_CONF: f64 = 0.25;
pub const CROP_MANIFEST: &str = "crops.csv";
pub const CROP_MANIFEST_HEADER: &str = "crop_id,frame,class_id,conf,x0,y0,x1,y1,timestamp_ms,cx,cy,w,h";

#[derive(Debug, Clone, PartialEq)]
pub struct CropRecord {
    pub crop_id: String,
    pub frame: String,
    pub class_id: u32,
    pub conf: f64,
    pub rect: PixelRect,
    pub timestamp_ms: i64,
    /// The detection box, normalized center format.
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CropRun {
    pub records: Vec<CropRecord>,
    /// One message per detection dropped for an empty rectangle.
    pub skipped_empty: Vec<String>,
    /// Detections whose crop id was already emitted.
    pub duplicates: usize,
    pub below_threshold: usize,
}

/// First 16 hex digits of SHA-256 over `frame|x0,y0,x1,y1|class`.
pub fn crop_id(frame: &str, rect: &PixelRect, class_id: u32) -> String {
    let key = format!("{frame}|{},{},{},{}|{class_id}", rect.x0, rect.y0, rect.x1, rect.y1);
    let digest = Sha256::digest(key.as_bytes());
    let mut s = String::with_capacity(16);
    for b in &digest[..8] {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Pixel rectangle for a normalized center box on a `width` x `height`
/// frame, each side pushed out by `margin` times the box side. Corners are
/// rounded half away from zero, then clipped.
pub fn crop_rect(
    b: &PredBox,
    margin: f64,
    width: usize,
    height: usize,
) -> Result<PixelRect, ImagingError> {
    let half_w = b.w * (0.5 + margin);
    let half_h = b.h * (0.5 + margin);
    let px = |v: f64, n: usize| (v * n as f64).round() as i64;
    PixelRect::clipped(
        px(b.cx - half_w, width),
        px(b.cy - half_h, height),
        px(b.cx + half_w, width),
        px(b.cy + half_h, height),
        width,
        height,
    )
}

pub(crate) fn read_preds(pred_dir: &Path, frame: &str) -> Result<Vec<PredBox>, PipelineError> {
    let path = pred_dir.join(format!("{}.txt", frame_stem(frame)));
    if !path.exists() {
        return Ok(Vec::new());
    }
    parse_pred_file(&read_text(&path)?).map_err(|source| PipelineError::Detections { path, source })
}

/// Crops every prediction with `conf >= conf_thr` (and, if given, a class in
/// `classes`) out of its frame, writes `<crop_id>.ppm` plus
/// [`CROP_MANIFEST`] into `out_dir`. Frames are visited in manifest order.
pub fn extract_crops(
    manifest: &FrameManifest,
    pred_dir: &Path,
    out_dir: &Path,
    conf_thr: f64,
    margin: f64,
    classes: Option<&BTreeSet<u32>>,
) -> Result<CropRun, PipelineError> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(PipelineError::Invalid(format!("margin {margin} must be >= 0")));
    }
    std::fs::create_dir_all(out_dir).map_err(PipelineError::io(out_dir))?;
    let run = for_each_crop(manifest, pred_dir, conf_thr, margin, classes, |rec, piece| {
        let path = out_dir.join(format!("{}.ppm", rec.crop_id));
        write_ppm(piece, &path).map_err(|source| PipelineError::Image { path, source })
    })?;
    write_crop_manifest(&run.records, &out_dir.join(CROP_MANIFEST))?;
    Ok(run)
}

/// The cropping pass of [`extract_crops`] without the writes: `sink` gets
/// each record with its pixels, in the same order and with the same ids.
pub fn for_each_crop(
    manifest: &FrameManifest,
    pred_dir: &Path,
    conf_thr: f64,
    margin: f64,
    classes: Option<&BTreeSet<u32>>,
    mut sink: impl FnMut(&CropRecord, &ImageRGB8) -> Result<(), PipelineError>,
) -> Result<CropRun, PipelineError> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(PipelineError::Invalid(format!("margin {margin} must be >= 0")));
    }
    let mut run = CropRun::default();
    let mut seen = HashSet::new();
    for row in &manifest.rows {
        let preds = read_preds(pred_dir, &row.frame)?;
        let wanted: Vec<&PredBox> = preds
            .iter()
            .filter(|p| classes.is_none_or(|c| c.contains(&p.class_id)))
            .collect();
        run.below_threshold += wanted.iter().filter(|p| p.conf < conf_thr).count();
        let wanted: Vec<&PredBox> = wanted.into_iter().filter(|p| p.conf >= conf_thr).collect();
        if wanted.is_empty() {
            continue;
        }
        let frame_path = manifest.frame_path(row);
        let img = read_ppm(&frame_path).map_err(|source| PipelineError::Image {
            path: frame_path.clone(),
            source,
        })?;
        for p in wanted {
            let rect = match crop_rect(p, margin, img.width(), img.height()) {
                Ok(r) => r,
                Err(e) => {
                    run.skipped_empty.push(format!(
                        "{}: class {} box ({}, {}, {}, {}): {e}",
                        row.frame, p.class_id, p.cx, p.cy, p.w, p.h
                    ));
                    continue;
                }
            };
            let id = crop_id(&row.frame, &rect, p.class_id);
            if !seen.insert(id.clone()) {
                run.duplicates += 1;
                continue;
            }
            let piece = crop(&img, rect).map_err(|source| PipelineError::Image {
                path: frame_path.clone(),
                source,
            })?;
            let rec = CropRecord {
                crop_id: id,
                frame: row.frame.clone(),
                class_id: p.class_id,
                conf: p.conf,
                rect,
                timestamp_ms: row.timestamp_ms,
                cx: p.cx,
                cy: p.cy,
                w: p.w,
                h: p.h,
            };
            sink(&rec, &piece)?;
            run.records.push(rec);
        }
    }
    Ok(run)
}

fn manifest_text(records: &[CropRecord]) -> String {
    let mut s = String::from(CROP_MANIFEST_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.crop_id,
            r.frame,
            r.class_id,
            r.conf,
            r.rect.x0,
            r.rect.y0,
            r.rect.x1,
            r.rect.y1,
            r.timestamp_ms,
            r.cx,
            r.cy,
            r.w,
            r.h
        );
    }
    s
}

pub fn write_crop_manifest(records: &[CropRecord], path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, manifest_text(records)).map_err(PipelineError::io(path))
}

pub fn parse_crop_manifest(text: &str) -> Result<Vec<CropRecord>, PipelineError> {
    let file = CROP_MANIFEST;
    csv_rows(text, file, CROP_MANIFEST_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let n = |i: usize, name: &str| field::<usize>(file, line, name, f[i]);
            Ok(CropRecord {
                crop_id: f[0].to_string(),
                frame: f[1].to_string(),
                class_id: field(file, line, "class_id", f[2])?,
                conf: field(file, line, "conf", f[3])?,
                rect: PixelRect {
                    x0: n(4, "x0")?,
                    y0: n(5, "y0")?,
                    x1: n(6, "x1")?,
                    y1: n(7, "y1")?,
                },
                timestamp_ms: field(file, line, "timestamp_ms", f[8])?,
                cx: field(file, line, "cx", f[9])?,
                cy: field(file, line, "cy", f[10])?,
                w: field(file, line, "w", f[11])?,
                h: field(file, line, "h", f[12])?,
            })
        })
        .collect()
}

pub fn read_crop_manifest(path: &Path) -> Result<Vec<CropRecord>, PipelineError> {
    parse_crop_manifest(&read_text(path)?)
}

/// `<dir>/<crop_id>.ppm`
pub fn crop_path(dir: &Path, crop_id: &str) -> PathBuf {
    dir.join(format!("{crop_id}.ppm"))
}
