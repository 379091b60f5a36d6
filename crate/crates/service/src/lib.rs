//! HTTP API for the labeling console and anomaly review.
//!
//! A service root directory holds:
//!
//! ```text
//! <root>/crops/crops.csv     crop manifest, as written by the crops stage
//! <root>/crops/<id>.ppm      crop images
//! <root>/labels.csv          append-only label store (created on first label)
//! <root>/anomalies.txt       anomaly records (optional)
//! ```
//!
//! Endpoints:
//!
//! - `GET /api/crops?status=unlabeled|labeled|all&limit=N`
//! - `GET /api/crops/{id}/image`
//! - `POST /api/crops/{id}/label` with `{"label": "damaged|undamaged|skip", "annotator": "..."}`
//! - `GET /api/anomalies?kind=&min_conf=&bbox=min_lat,min_lon,max_lat,max_lon`
//! - `GET /api/stats`
//!
//! Errors are `{"error": "..."}` with status 400 or 404 (500 for I/O).

mod store;

pub use store::{LabelIndex, LabelStore};

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use roadwatch_core::imaging::{encode_png_stored, read_ppm};
use roadwatch_core::pipeline::{
    format_label_row, read_anomalies, read_crop_manifest, AnomalyKind, AnomalyRecord, CropRecord,
    Label, LabelRow, PipelineError, CROP_MANIFEST,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 10_000;
pub const LABELS_FILE: &str = "labels.csv";
pub const ANOMALIES_FILE: &str = "anomalies.txt";
pub const CROPS_DIR: &str = "crops";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Everything the handlers read. Crops and anomalies are fixed for the
/// life of the server; labels live in the store.
#[derive(Debug)]
pub struct AppState {
    crops_dir: PathBuf,
    /// Sorted by crop id.
    crops: Vec<CropRecord>,
    by_id: HashMap<String, usize>,
    anomalies: Vec<AnomalyRecord>,
    store: LabelStore,
}

impl AppState {
    pub fn open(root: &Path) -> Result<Self, ServiceError> {
        let crops_dir = root.join(CROPS_DIR);
        let mut crops = read_crop_manifest(&crops_dir.join(CROP_MANIFEST))?;
        crops.sort_by(|a, b| a.crop_id.cmp(&b.crop_id));
        let by_id = crops
            .iter()
            .enumerate()
            .map(|(i, c)| (c.crop_id.clone(), i))
            .collect();
        let anomalies_path = root.join(ANOMALIES_FILE);
        let anomalies = if anomalies_path.exists() {
            read_anomalies(&anomalies_path)?
        } else {
            Vec::new()
        };
        Ok(AppState {
            crops_dir,
            crops,
            by_id,
            anomalies,
            store: LabelStore::open(root.join(LABELS_FILE))?,
        })
    }

    pub fn store(&self) -> &LabelStore {
        &self.store
    }

    pub fn crops(&self) -> &[CropRecord] {
        &self.crops
    }

    pub fn stats(&self) -> Stats {
        let index = self.store.snapshot();
        let mut s = Stats {
            total_crops: self.crops.len(),
            ..Stats::default()
        };
        for c in &self.crops {
            match index.label_of(&c.crop_id) {
                Some(Label::Damaged) => s.damaged += 1,
                Some(Label::Undamaged) => s.undamaged += 1,
                Some(Label::Skip) => s.skipped += 1,
                None => {}
            }
        }
        s.labeled = s.damaged + s.undamaged;
        s.unlabeled = s.total_crops - s.labeled;
        s.anomalies.total = self.anomalies.len();
        for a in &self.anomalies {
            match a.kind {
                AnomalyKind::RoadDamage => s.anomalies.road_damage += 1,
                AnomalyKind::DamagedSign => s.anomalies.damaged_sign += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyCounts {
    pub total: usize,
    pub road_damage: usize,
    pub damaged_sign: usize,
}

/// `labeled` counts damaged + undamaged; skipped crops stay in the
/// unlabeled queue, so `unlabeled = total_crops - labeled`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub total_crops: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    pub damaged: usize,
    pub undamaged: usize,
    pub skipped: usize,
    pub anomalies: AnomalyCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropItem {
    pub crop_id: String,
    pub class_id: u32,
    pub conf: f64,
    pub frame: String,
    pub timestamp_ms: i64,
    pub image_url: String,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropPage {
    /// Crops matching the status filter, before the limit.
    pub matched: usize,
    pub crops: Vec<CropItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub label: String,
    #[serde(default)]
    pub annotator: Option<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/crops", get(list_crops))
        .route("/api/crops/{id}/image", get(crop_image))
        .route("/api/crops/{id}/label", post(label_crop))
        .route("/api/anomalies", get(list_anomalies))
        .route("/api/stats", get(stats))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(root: &Path, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::open(root)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown crop id {id:?}"))
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

/// Decodes `a=b&c=d`, rejecting unknown and repeated keys. Empty values
/// count as absent.
fn query_map<'a>(raw: &'a Option<String>, allowed: &[&str]) -> Result<HashMap<&'a str, String>, ApiError> {
    let mut out = HashMap::new();
    let Some(raw) = raw else { return Ok(out) };
    for pair in raw.split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        if !allowed.contains(&k) {
            return Err(bad_request(format!("unknown query parameter {k:?}")));
        }
        let v = percent_decode(v).ok_or_else(|| bad_request(format!("bad encoding in {k:?}")))?;
        if out.insert(k, v).is_some() {
            return Err(bad_request(format!("repeated query parameter {k:?}")));
        }
    }
    out.retain(|_, v| !v.is_empty());
    Ok(out)
}

fn percent_decode(s: &str) -> Option<String> {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'%' => {
                let hex = std::str::from_utf8(b.get(i + 1..i + 3)?).ok()?;
                out.push(u8::from_str_radix(hex, 16).ok()?);
                i += 3;
            }
            b'+' => {
                out.push(b' ');
                i += 1;
            }
            c => {
                out.push(c);
                i += 1;
            }
        }
    }
    String::from_utf8(out).ok()
}

async fn list_crops(State(st): State<Arc<AppState>>, RawQuery(q): RawQuery) -> Result<Json<CropPage>, ApiError> {
    let q = query_map(&q, &["status", "limit"])?;
    let status = q.get("status").map(String::as_str).unwrap_or("unlabeled");
    if !matches!(status, "unlabeled" | "labeled" | "all") {
        return Err(bad_request(format!("status must be unlabeled, labeled or all, got {status:?}")));
    }
    let limit = match q.get("limit") {
        None => DEFAULT_LIMIT,
        Some(v) => match v.parse::<usize>() {
            Ok(n) if (1..=MAX_LIMIT).contains(&n) => n,
            _ => return Err(bad_request(format!("limit must be an integer in 1..={MAX_LIMIT}, got {v:?}"))),
        },
    };
    let index = st.store.snapshot();
    let matching: Vec<(&CropRecord, Option<Label>)> = st
        .crops
        .iter()
        .map(|c| (c, index.label_of(&c.crop_id)))
        .filter(|(_, l)| {
            let done = matches!(l, Some(Label::Damaged | Label::Undamaged));
            match status {
                "unlabeled" => !done,
                "labeled" => done,
                _ => true,
            }
        })
        .collect();
    let crops = matching
        .iter()
        .take(limit)
        .map(|(c, label)| CropItem {
            crop_id: c.crop_id.clone(),
            class_id: c.class_id,
            conf: c.conf,
            frame: c.frame.clone(),
            timestamp_ms: c.timestamp_ms,
            image_url: format!("/api/crops/{}/image", c.crop_id),
            label: *label,
        })
        .collect();
    Ok(Json(CropPage {
        matched: matching.len(),
        crops,
    }))
}

async fn crop_image(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    if !st.by_id.contains_key(&id) {
        return Err(not_found(&id));
    }
    let path = st.crops_dir.join(format!("{id}.ppm"));
    let png = tokio::task::spawn_blocking(move || read_ppm(&path).map(|img| encode_png_stored(&img)))
        .await
        .map_err(internal)?
        .map_err(internal)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn label_crop(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<LabelRow>, ApiError> {
    if !st.by_id.contains_key(&id) {
        return Err(not_found(&id));
    }
    let req: LabelRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("bad request body: {e}")))?;
    let label: Label = req.label.parse().map_err(bad_request)?;
    let annotator = req.annotator.unwrap_or_else(|| "anonymous".into());
    let labeled_at_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0);
    let row = LabelRow {
        crop_id: id,
        label,
        annotator,
        labeled_at_ms,
    };
    format_label_row(&row).map_err(|e| bad_request(e.to_string()))?;
    let st2 = st.clone();
    let saved = row.clone();
    tokio::task::spawn_blocking(move || st2.store.append(saved))
        .await
        .map_err(internal)?
        .map_err(internal)?;
    Ok(Json(row))
}

/// (min_lat, min_lon, max_lat, max_lon)
fn parse_bbox(v: &str) -> Result<[f64; 4], ApiError> {
    let err = || bad_request(format!("bbox must be min_lat,min_lon,max_lat,max_lon, got {v:?}"));
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| err())?;
    let b: [f64; 4] = parts.try_into().map_err(|_| err())?;
    if b.iter().any(|x| !x.is_finite()) || b[0] > b[2] || b[1] > b[3] {
        return Err(err());
    }
    Ok(b)
}

async fn list_anomalies(
    State(st): State<Arc<AppState>>,
    RawQuery(q): RawQuery,
) -> Result<Json<Vec<AnomalyRecord>>, ApiError> {
    let q = query_map(&q, &["kind", "min_conf", "bbox"])?;
    let kind: Option<AnomalyKind> = q.get("kind").map(|k| k.parse()).transpose().map_err(bad_request)?;
    let min_conf = match q.get("min_conf") {
        None => 0.0,
        Some(v) => match v.parse::<f64>() {
            Ok(x) if (0.0..=1.0).contains(&x) => x,
            _ => return Err(bad_request(format!("min_conf must be a number in [0, 1], got {v:?}"))),
        },
    };
    let bbox = q.get("bbox").map(|v| parse_bbox(v)).transpose()?;
    let out = st
        .anomalies
        .iter()
        .filter(|a| kind.is_none_or(|k| a.kind == k))
        .filter(|a| a.confidence >= min_conf)
        .filter(|a| {
            bbox.is_none_or(|b| match (a.lat, a.lon) {
                (Some(lat), Some(lon)) => lat >= b[0] && lat <= b[2] && lon >= b[1] && lon <= b[3],
                _ => false,
            })
        })
        .cloned()
        .collect();
    Ok(Json(out))
}

async fn stats(State(st): State<Arc<AppState>>) -> Json<Stats> {
    Json(st.stats())
}
