use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AnomalyKind, AnomalyRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    /// Both kinds are always listed.
    pub by_kind: BTreeMap<String, usize>,
    /// kind -> class id -> count
    pub by_class: BTreeMap<String, BTreeMap<u32, usize>>,
    pub geotagged: usize,
    /// 0 for an empty file.
    pub geotagged_fraction: f64,
    pub first_timestamp_ms: Option<i64>,
    pub last_timestamp_ms: Option<i64>,
}

pub fn summarize(records: &[AnomalyRecord]) -> Summary {
    let mut by_kind = BTreeMap::new();
    let mut by_class: BTreeMap<String, BTreeMap<u32, usize>> = BTreeMap::new();
    for k in [AnomalyKind::RoadDamage, AnomalyKind::DamagedSign] {
        by_kind.insert(k.as_str().to_string(), 0);
        by_class.insert(k.as_str().to_string(), BTreeMap::new());
    }
    for r in records {
        *by_kind.get_mut(r.kind.as_str()).expect("both kinds seeded") += 1;
        *by_class
            .get_mut(r.kind.as_str())
            .expect("both kinds seeded")
            .entry(r.class_id)
            .or_default() += 1;
    }
    let geotagged = records.iter().filter(|r| r.lat.is_some()).count();
    Summary {
        total: records.len(),
        by_kind,
        by_class,
        geotagged,
        geotagged_fraction: if records.is_empty() {
            0.0
        } else {
            geotagged as f64 / records.len() as f64
        },
        first_timestamp_ms: records.iter().map(|r| r.timestamp_ms).min(),
        last_timestamp_ms: records.iter().map(|r| r.timestamp_ms).max(),
    }
}

pub fn format_summary(s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>6} {:>6}", "kind", "class", "count");
    for (kind, classes) in &s.by_class {
        for (class, n) in classes {
            let _ = writeln!(out, "{kind:<14} {class:>6} {n:>6}");
        }
        let _ = writeln!(out, "{kind:<14} {:>6} {:>6}", "all", s.by_kind[kind]);
    }
    let _ = writeln!(out, "total {}", s.total);
    let _ = writeln!(
        out,
        "geotagged {} of {} ({:.6})",
        s.geotagged, s.total, s.geotagged_fraction
    );
    match (s.first_timestamp_ms, s.last_timestamp_ms) {
        (Some(a), Some(b)) => {
            let _ = writeln!(out, "time range {a} .. {b} ms");
        }
        _ => {
            let _ = writeln!(out, "time range none");
        }
    }
    out
}
