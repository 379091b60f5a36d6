use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use proptest::prelude::*;
use roadwatch_core::detections::PredBox;
use roadwatch_core::imaging::{read_ppm, write_ppm};
use roadwatch_core::pipeline::{
    crop_id, crop_rect, emit_anomalies, extract_crops, format_anomaly_line, geo_interpolate,
    parse_anomalies, read_crop_manifest, summarize, AnomalyThresholds, CropRecord,
    DamageDetection, FrameManifest, GpsPoint, GpsTrack, SignPrediction, CROP_MANIFEST,
};
use roadwatch_core::{ImageRGB8, PixelRect};

fn arb_pred() -> impl Strategy<Value = PredBox> {
    (0u32..4, 0.0f64..=1.0, 0.0f64..=1.0, 0.001f64..=1.0, 0.001f64..=1.0, 0.0f64..=1.0)
        .prop_map(|(class_id, cx, cy, w, h, conf)| PredBox { class_id, cx, cy, w, h, conf })
}

fn frame_image(w: usize, h: usize, seed: usize) -> ImageRGB8 {
    let data = (0..w * h * 3).map(|i| ((i * 31 + seed * 17) % 251) as u8).collect();
    ImageRGB8::new(w, h, data).unwrap()
}

fn pred_line(p: &PredBox) -> String {
    format!("{} {} {} {} {} {}\n", p.class_id, p.cx, p.cy, p.w, p.h, p.conf)
}

/// Writes frames, a manifest and prediction files into `root`.
fn write_corpus(root: &Path, frames: &[Vec<PredBox>], w: usize, h: usize) -> FrameManifest {
    std::fs::create_dir_all(root.join("frames")).unwrap();
    std::fs::create_dir_all(root.join("preds")).unwrap();
    let mut manifest = String::from("frame,timestamp_ms\n");
    for (i, preds) in frames.iter().enumerate() {
        let name = format!("f{i:03}.ppm");
        write_ppm(&frame_image(w, h, i), root.join("frames").join(&name)).unwrap();
        let _ = writeln!(manifest, "{name},{}", 1000 * i as i64);
        let body: String = preds.iter().map(pred_line).collect();
        std::fs::write(root.join("preds").join(format!("f{i:03}.txt")), body).unwrap();
    }
    let path = root.join("frames").join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    FrameManifest::load(&path).unwrap()
}

proptest! {
    #[test]
    fn crop_rect_stays_inside_frame(p in arb_pred(), margin in 0.0f64..0.5, w in 1usize..800, h in 1usize..800) {
        if let Ok(r) = crop_rect(&p, margin, w, h) {
            prop_assert!(r.x0 < r.x1 && r.x1 <= w);
            prop_assert!(r.y0 < r.y1 && r.y1 <= h);
            // the unclipped rectangle around the centre, clipped to the frame
            let cx = (p.cx * w as f64).round() as i64;
            let cy = (p.cy * h as f64).round() as i64;
            let inside_x = cx.clamp(0, w as i64 - 1) as usize;
            let inside_y = cy.clamp(0, h as i64 - 1) as usize;
            if p.w * w as f64 >= 2.0 && p.h * h as f64 >= 2.0 {
                prop_assert!(r.x0 <= inside_x + 1 && inside_x <= r.x1);
                prop_assert!(r.y0 <= inside_y + 1 && inside_y <= r.y1);
            }
        }
    }

    #[test]
    fn crop_id_is_a_pure_function(frame in "[a-z0-9_]{1,12}\\.ppm", x0 in 0usize..600, y0 in 0usize..400, dx in 1usize..100, dy in 1usize..100, class in 0u32..10) {
        let r = PixelRect { x0, y0, x1: x0 + dx, y1: y0 + dy };
        let a = crop_id(&frame, &r, class);
        prop_assert_eq!(&a, &crop_id(&frame, &r, class));
        prop_assert_eq!(a.len(), 16);
        prop_assert!(a.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        prop_assert_ne!(&a, &crop_id(&frame, &r, class + 1));
        let moved = PixelRect { x1: r.x1 + 1, ..r };
        prop_assert_ne!(a, crop_id(&frame, &moved, class));
    }

    #[test]
    fn geo_exact_at_knots_and_monotone_between(
        steps in prop::collection::vec((1i64..10_000, -0.01f64..0.01, -0.01f64..0.01), 1..8),
        probes in prop::collection::vec(0.0f64..1.0, 1..10),
    ) {
        let mut pts = vec![GpsPoint { timestamp_ms: 0, lat: 45.0, lon: 9.0 }];
        for (dt, dlat, dlon) in &steps {
            let last = *pts.last().unwrap();
            pts.push(GpsPoint { timestamp_ms: last.timestamp_ms + dt, lat: last.lat + dlat, lon: last.lon + dlon });
        }
        let track = GpsTrack::new(pts.clone()).unwrap();
        for p in &pts {
            prop_assert_eq!(geo_interpolate(&track, p.timestamp_ms, 0), Some((p.lat, p.lon)));
        }
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let mut ts: Vec<i64> = probes.iter().map(|f| a.timestamp_ms + (f * (b.timestamp_ms - a.timestamp_ms) as f64) as i64).collect();
            ts.sort();
            let fixes: Vec<(f64, f64)> = ts.iter().map(|&t| geo_interpolate(&track, t, 0).unwrap()).collect();
            for w in fixes.windows(2) {
                prop_assert!((w[1].0 - w[0].0) * (b.lat - a.lat) >= -1e-12);
                prop_assert!((w[1].1 - w[0].1) * (b.lon - a.lon) >= -1e-12);
            }
            for (lat, lon) in fixes {
                prop_assert!(lat >= a.lat.min(b.lat) - 1e-12 && lat <= a.lat.max(b.lat) + 1e-12);
                prop_assert!(lon >= a.lon.min(b.lon) - 1e-12 && lon <= a.lon.max(b.lon) + 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_detection_is_accounted_for(
        frames in prop::collection::vec(prop::collection::vec(arb_pred(), 0..6), 1..4),
        thr in 0.0f64..1.0,
    ) {
        let dir = tempfile::tempdir().unwrap();
        // duplicate one detection to exercise the duplicate counter
        let mut frames = frames;
        if let Some(p) = frames[0].first().cloned() {
            frames[0].push(p);
        }
        let manifest = write_corpus(dir.path(), &frames, 64, 48);
        let out = dir.path().join("crops");
        let run = extract_crops(&manifest, &dir.path().join("preds"), &out, thr, 0.1, None).unwrap();
        let total: usize = frames.iter().map(Vec::len).sum();
        prop_assert_eq!(run.records.len() + run.skipped_empty.len() + run.duplicates + run.below_threshold, total);
        let on_disk = std::fs::read_dir(&out).unwrap().count();
        prop_assert_eq!(on_disk, run.records.len() + 1);
        prop_assert_eq!(read_crop_manifest(&out.join(CROP_MANIFEST)).unwrap().len(), run.records.len());
    }
}

#[test]
fn rerunning_extraction_reproduces_ids_and_bytes() {
    let frames = vec![
        vec![
            PredBox { class_id: 0, cx: 0.5, cy: 0.5, w: 0.2, h: 0.3, conf: 0.9 },
            PredBox { class_id: 1, cx: 0.1, cy: 0.9, w: 0.3, h: 0.3, conf: 0.6 },
        ],
        vec![PredBox { class_id: 0, cx: 0.8, cy: 0.2, w: 0.1, h: 0.1, conf: 0.2 }],
        vec![PredBox { class_id: 2, cx: 0.3, cy: 0.4, w: 0.5, h: 0.25, conf: 0.5 }],
    ];
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(dir.path(), &frames, 640, 480);
    let preds = dir.path().join("preds");
    let a = extract_crops(&manifest, &preds, &dir.path().join("a"), 0.25, 0.1, None).unwrap();
    let b = extract_crops(&manifest, &preds, &dir.path().join("b"), 0.25, 0.1, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 3);
    assert_eq!(a.below_threshold, 1);
    for name in std::iter::once(CROP_MANIFEST.to_string()).chain(a.records.iter().map(|r| format!("{}.ppm", r.crop_id))) {
        let x = std::fs::read(dir.path().join("a").join(&name)).unwrap();
        assert_eq!(x, std::fs::read(dir.path().join("b").join(&name)).unwrap(), "{name}");
    }
    // first crop: 0.5 +- 0.12 of 640 and 0.5 +- 0.18 of 480
    let r = a.records[0].rect;
    assert_eq!((r.x0, r.y0, r.x1, r.y1), (243, 154, 397, 326));
    let piece = read_ppm(dir.path().join("a").join(format!("{}.ppm", a.records[0].crop_id))).unwrap();
    let src = frame_image(640, 480, 0);
    assert_eq!((piece.width(), piece.height()), (154, 172));
    assert_eq!(piece.pixel(0, 0), src.pixel(243, 154));
    assert_eq!(piece.pixel(153, 171), src.pixel(396, 325));

    let only_signs: BTreeSet<u32> = [0].into();
    let c = extract_crops(&manifest, &preds, &dir.path().join("c"), 0.25, 0.1, Some(&only_signs)).unwrap();
    assert_eq!(c.records.len(), 1);
    assert_eq!(c.records[0].crop_id, a.records[0].crop_id);
}

fn sign(id: &str, t: i64, p: f64) -> SignPrediction {
    SignPrediction {
        crop: CropRecord {
            crop_id: id.into(),
            frame: format!("{id}.ppm"),
            class_id: 0,
            conf: 0.9,
            rect: PixelRect { x0: 0, y0: 0, x1: 4, y1: 4 },
            timestamp_ms: t,
            cx: 0.5,
            cy: 0.5,
            w: 0.1,
            h: 0.1,
        },
        probability: p,
    }
}

fn damage(frame: &str, t: i64, class_id: u32, conf: f64) -> DamageDetection {
    DamageDetection {
        frame: frame.into(),
        timestamp_ms: t,
        pred: PredBox { class_id, cx: 0.25, cy: 0.75, w: 0.2, h: 0.1, conf },
    }
}

proptest! {
    #[test]
    fn anomalies_are_order_independent_and_round_trip(
        dmg in prop::collection::vec((0i64..20_000, 1u32..4, 0.0f64..1.0), 0..8),
        signs in prop::collection::vec((0i64..20_000, 0.0f64..1.0), 0..8),
        seed in any::<u64>(),
    ) {
        let dmg: Vec<DamageDetection> = dmg.iter().enumerate().map(|(i, (t, c, conf))| damage(&format!("d{i}.ppm"), *t, *c, *conf)).collect();
        let signs: Vec<SignPrediction> = signs.iter().enumerate().map(|(i, (t, p))| sign(&format!("{i:016x}"), *t, *p)).collect();
        let track = GpsTrack::new(vec![
            GpsPoint { timestamp_ms: 2000, lat: 10.0, lon: 20.0 },
            GpsPoint { timestamp_ms: 12000, lat: 10.01, lon: 20.02 },
        ]).unwrap();
        let th = AnomalyThresholds::default();
        let text = |d: &[DamageDetection], s: &[SignPrediction]| -> String {
            emit_anomalies(d, s, Some(&track), &th).unwrap().iter().map(|r| format_anomaly_line(r) + "\n").collect()
        };
        let a = text(&dmg, &signs);
        let (mut d2, mut s2) = (dmg.clone(), signs.clone());
        let k = (seed % 7) as usize;
        d2.reverse();
        if !s2.is_empty() { let n = s2.len(); s2.rotate_left(k % n); }
        prop_assert_eq!(&a, &text(&d2, &s2));

        let recs = parse_anomalies(&a).unwrap();
        let again: String = recs.iter().map(|r| format_anomaly_line(r) + "\n").collect();
        prop_assert_eq!(&again, &a);

        let want = dmg.iter().filter(|d| d.pred.conf >= th.detector_conf).count()
            + signs.iter().filter(|s| s.probability >= th.classifier).count();
        let s = summarize(&recs);
        prop_assert_eq!(s.total, want);
        prop_assert_eq!(s.by_kind.values().sum::<usize>(), s.total);
        let per_class: usize = s.by_class.values().flat_map(|m| m.values()).sum();
        prop_assert_eq!(per_class, s.total);
        let tagged = recs.iter().filter(|r| (2000 - 5000..=12000 + 5000).contains(&r.timestamp_ms)).count();
        prop_assert_eq!(s.geotagged, tagged);
        prop_assert!(recs.windows(2).all(|w| (w[0].timestamp_ms, &w[0].id) <= (w[1].timestamp_ms, &w[1].id)));
    }
}
