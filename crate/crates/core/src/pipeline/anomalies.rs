use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::crops::{crop_path, for_each_crop, read_preds};
use super::gps::{geo_interpolate, GpsTrack, DEFAULT_GPS_TOLERANCE_MS};
use super::{read_text, CropRecord, FrameManifest, PipelineError};
use crate::classifier::{predict, ModelCheckpoint};
use crate::detections::PredBox;
use crate::imaging::read_ppm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    RoadDamage,
    DamagedSign,
}

impl AnomalyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnomalyKind::RoadDamage => "road_damage",
            AnomalyKind::DamagedSign => "damaged_sign",
        }
    }
}

impl std::str::FromStr for AnomalyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "road_damage" => Ok(AnomalyKind::RoadDamage),
            "damaged_sign" => Ok(AnomalyKind::DamagedSign),
            _ => Err(format!("unknown kind {s:?}")),
        }
    }
}

/// One line of the anomalies file:
///
/// ```text
/// id=<id> kind=<road_damage|damaged_sign> class_id=<n> confidence=<f> frame=<name> cx=<f> cy=<f> w=<f> h=<f> lat=<f|> lon=<f|> timestamp_ms=<n>
/// ```
///
/// Floats carry 6 decimals; `lat`/`lon` are empty when the frame could not
/// be geotagged. `confidence` is the detector score for road damage and the
/// classifier probability for signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub id: String,
    pub kind: AnomalyKind,
    pub class_id: u32,
    pub confidence: f64,
    pub frame: String,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub timestamp_ms: i64,
}

const KEYS: [&str; 12] = [
    "id",
    "kind",
    "class_id",
    "confidence",
    "frame",
    "cx",
    "cy",
    "w",
    "h",
    "lat",
    "lon",
    "timestamp_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DamageDetection {
    pub frame: String,
    pub timestamp_ms: i64,
    pub pred: PredBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignPrediction {
    pub crop: CropRecord,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyThresholds {
    /// Minimum detector confidence for a road-damage record.
    pub detector_conf: f64,
    /// Minimum classifier probability for a damaged-sign record.
    pub classifier: f64,
    pub gps_tolerance_ms: i64,
}

impl Default for AnomalyThresholds {
    fn default() -> Self {
        Self {
            detector_conf: 0.25,
            classifier: 0.5,
            gps_tolerance_ms: DEFAULT_GPS_TOLERANCE_MS,
        }
    }
}

/// Every detection whose class is not a sign class, in manifest order.
pub fn collect_damage_detections(
    manifest: &FrameManifest,
    pred_dir: &Path,
    sign_classes: &BTreeSet<u32>,
) -> Result<Vec<DamageDetection>, PipelineError> {
    let mut out = Vec::new();
    for row in &manifest.rows {
        for pred in read_preds(pred_dir, &row.frame)? {
            if !sign_classes.contains(&pred.class_id) {
                out.push(DamageDetection {
                    frame: row.frame.clone(),
                    timestamp_ms: row.timestamp_ms,
                    pred,
                });
            }
        }
    }
    Ok(out)
}

/// Runs the classifier over the sign crops (those whose class is in
/// `sign_classes`) stored in `crops_dir`.
pub fn classify_crops(
    ckpt: &ModelCheckpoint,
    crops: &[CropRecord],
    crops_dir: &Path,
    sign_classes: &BTreeSet<u32>,
) -> Result<Vec<SignPrediction>, PipelineError> {
    crops
        .iter()
        .filter(|c| sign_classes.contains(&c.class_id))
        .map(|c| {
            let path = crop_path(crops_dir, &c.crop_id);
            let img = read_ppm(&path).map_err(|source| PipelineError::Image { path, source })?;
            Ok(SignPrediction {
                crop: c.clone(),
                probability: predict(ckpt, &img)?,
            })
        })
        .collect()
}

/// Crops the sign detections straight from the frames and classifies them,
/// without writing the crops anywhere. Matches [`extract_crops`] followed by
/// [`classify_crops`] with the same thresholds.
///
/// [`extract_crops`]: super::extract_crops
pub fn classify_sign_detections(
    ckpt: &ModelCheckpoint,
    manifest: &FrameManifest,
    pred_dir: &Path,
    conf_thr: f64,
    margin: f64,
    sign_classes: &BTreeSet<u32>,
) -> Result<Vec<SignPrediction>, PipelineError> {
    let mut out = Vec::new();
    for_each_crop(manifest, pred_dir, conf_thr, margin, Some(sign_classes), |rec, piece| {
        out.push(SignPrediction {
            crop: rec.clone(),
            probability: predict(ckpt, piece)?,
        });
        Ok(())
    })?;
    Ok(out)
}

fn damage_id(d: &DamageDetection) -> String {
    let p = &d.pred;
    let key = format!(
        "road_damage|{}|{}|{:.6},{:.6},{:.6},{:.6}",
        d.frame, p.class_id, p.cx, p.cy, p.w, p.h
    );
    let digest = Sha256::digest(key.as_bytes());
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Builds the anomaly records, geotagged from `track` when given, sorted
/// by timestamp then id.
pub fn emit_anomalies(
    damage: &[DamageDetection],
    signs: &[SignPrediction],
    track: Option<&GpsTrack>,
    th: &AnomalyThresholds,
) -> Result<Vec<AnomalyRecord>, PipelineError> {
    if !(th.classifier > 0.0 && th.classifier < 1.0) {
        return Err(PipelineError::Invalid(format!(
            "classifier threshold {} outside (0, 1)",
            th.classifier
        )));
    }
    let geo = |t: i64| track.and_then(|tr| geo_interpolate(tr, t, th.gps_tolerance_ms));
    let mut out = Vec::new();
    for d in damage.iter().filter(|d| d.pred.conf >= th.detector_conf) {
        let pos = geo(d.timestamp_ms);
        out.push(AnomalyRecord {
            id: damage_id(d),
            kind: AnomalyKind::RoadDamage,
            class_id: d.pred.class_id,
            confidence: d.pred.conf,
            frame: d.frame.clone(),
            cx: d.pred.cx,
            cy: d.pred.cy,
            w: d.pred.w,
            h: d.pred.h,
            lat: pos.map(|p| p.0),
            lon: pos.map(|p| p.1),
            timestamp_ms: d.timestamp_ms,
        });
    }
    for s in signs.iter().filter(|s| s.probability >= th.classifier) {
        let c = &s.crop;
        let pos = geo(c.timestamp_ms);
        out.push(AnomalyRecord {
            id: c.crop_id.clone(),
            kind: AnomalyKind::DamagedSign,
            class_id: c.class_id,
            confidence: s.probability,
            frame: c.frame.clone(),
            cx: c.cx,
            cy: c.cy,
            w: c.w,
            h: c.h,
            lat: pos.map(|p| p.0),
            lon: pos.map(|p| p.1),
            timestamp_ms: c.timestamp_ms,
        });
    }
    out.sort_by(|a, b| a.timestamp_ms.cmp(&b.timestamp_ms).then_with(|| a.id.cmp(&b.id)));
    Ok(out)
}

pub fn format_anomaly_line(r: &AnomalyRecord) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    format!(
        "id={} kind={} class_id={} confidence={:.6} frame={} cx={:.6} cy={:.6} w={:.6} h={:.6} lat={} lon={} timestamp_ms={}",
        r.id,
        r.kind.as_str(),
        r.class_id,
        r.confidence,
        r.frame,
        r.cx,
        r.cy,
        r.w,
        r.h,
        opt(r.lat),
        opt(r.lon),
        r.timestamp_ms
    )
}

pub fn write_anomalies(path: &Path, records: &[AnomalyRecord]) -> Result<(), PipelineError> {
    let mut s = String::new();
    for r in records {
        s.push_str(&format_anomaly_line(r));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(PipelineError::io(path))
}

fn parse_line(line: &str, n: usize) -> Result<AnomalyRecord, PipelineError> {
    let file = "anomalies";
    let err = |m: String| PipelineError::parse(file, n, m);
    let mut map: HashMap<&str, &str> = HashMap::new();
    for tok in line.split(' ') {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, found {tok:?}")))?;
        if !KEYS.contains(&k) {
            return Err(err(format!("unknown key {k:?}")));
        }
        if map.insert(k, v).is_some() {
            return Err(err(format!("duplicate key {k:?}")));
        }
    }
    if let Some(missing) = KEYS.iter().find(|k| !map.contains_key(*k)) {
        return Err(err(format!("missing key {missing:?}")));
    }
    fn num<T: std::str::FromStr>(map: &HashMap<&str, &str>, k: &str) -> Result<T, String> {
        map[k].parse().map_err(|_| format!("{k}: invalid value {:?}", map[k]))
    }
    let opt = |k: &str| -> Result<Option<f64>, String> {
        if map[k].is_empty() {
            Ok(None)
        } else {
            num(&map, k).map(Some)
        }
    };
    let rec = (|| -> Result<AnomalyRecord, String> {
        Ok(AnomalyRecord {
            id: map["id"].to_string(),
            kind: map["kind"].parse()?,
            class_id: num(&map, "class_id")?,
            confidence: num(&map, "confidence")?,
            frame: map["frame"].to_string(),
            cx: num(&map, "cx")?,
            cy: num(&map, "cy")?,
            w: num(&map, "w")?,
            h: num(&map, "h")?,
            lat: opt("lat")?,
            lon: opt("lon")?,
            timestamp_ms: num(&map, "timestamp_ms")?,
        })
    })()
    .map_err(err)?;
    if rec.lat.is_some() != rec.lon.is_some() {
        return Err(err("lat and lon must both be present or both empty".into()));
    }
    if !(0.0..=1.0).contains(&rec.confidence) {
        return Err(err(format!("confidence {} outside [0, 1]", rec.confidence)));
    }
    Ok(rec)
}

pub fn parse_anomalies(text: &str) -> Result<Vec<AnomalyRecord>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l.trim_end_matches('\r'), i + 1))
        .collect()
}

pub fn read_anomalies(path: &Path) -> Result<Vec<AnomalyRecord>, PipelineError> {
    parse_anomalies(&read_text(path)?)
}
