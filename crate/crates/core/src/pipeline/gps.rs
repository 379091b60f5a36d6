use super::{csv_rows, field, PipelineError};

pub const GPS_HEADER: &str = "timestamp_ms,lat,lon";
pub const DEFAULT_GPS_TOLERANCE_MS: i64 = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsPoint {
    pub timestamp_ms: i64,
    pub lat: f64,
    pub lon: f64,
}

/// Non-empty, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsTrack {
    points: Vec<GpsPoint>,
}

impl GpsTrack {
    pub fn new(points: Vec<GpsPoint>) -> Result<Self, PipelineError> {
        if points.is_empty() {
            return Err(PipelineError::Invalid("GPS track is empty".into()));
        }
        for w in points.windows(2) {
            if w[1].timestamp_ms <= w[0].timestamp_ms {
                return Err(PipelineError::Invalid(format!(
                    "GPS timestamps not strictly increasing at {}",
                    w[1].timestamp_ms
                )));
            }
        }
        for p in &points {
            if !((-90.0..=90.0).contains(&p.lat) && (-180.0..=180.0).contains(&p.lon)) {
                return Err(PipelineError::Invalid(format!(
                    "GPS fix out of range at {}: {}, {}",
                    p.timestamp_ms, p.lat, p.lon
                )));
            }
        }
        Ok(GpsTrack { points })
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let file = "gps track";
        let mut points = Vec::new();
        for (line, f) in csv_rows(text, file, GPS_HEADER)? {
            points.push(GpsPoint {
                timestamp_ms: field(file, line, "timestamp_ms", f[0])?,
                lat: field(file, line, "lat", f[1])?,
                lon: field(file, line, "lon", f[2])?,
            });
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[GpsPoint] {
        &self.points
    }
}

/// Position at `t`: linear between the bracketing fixes, the nearest end
/// fix within `tolerance_ms` outside the track, otherwise `None`.
pub fn geo_interpolate(track: &GpsTrack, t: i64, tolerance_ms: i64) -> Option<(f64, f64)> {
    let pts = &track.points;
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if t < first.timestamp_ms {
        return (first.timestamp_ms - t <= tolerance_ms).then_some((first.lat, first.lon));
    }
    if t > last.timestamp_ms {
        return (t - last.timestamp_ms <= tolerance_ms).then_some((last.lat, last.lon));
    }
    match pts.binary_search_by_key(&t, |p| p.timestamp_ms) {
        Ok(i) => Some((pts[i].lat, pts[i].lon)),
        Err(i) => {
            let (a, b) = (pts[i - 1], pts[i]);
            let f = (t - a.timestamp_ms) as f64 / (b.timestamp_ms - a.timestamp_ms) as f64;
            Some((a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f))
        }
    }
}
