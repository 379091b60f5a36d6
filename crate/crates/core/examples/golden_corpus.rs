//! Writes the bundled mini-corpus used by the golden end-to-end test.
//!
//! cargo run -p roadwatch-core --example golden_corpus -- crates/core/tests/data/golden

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng as _;
use roadwatch_core::detections::PredBox;
use roadwatch_core::imaging::write_ppm;
use roadwatch_core::pipeline::{crop_id, crop_rect, DEFAULT_MARGIN};
use roadwatch_core::rng::{stream, Purpose};
use roadwatch_core::synthetic::sign_crop;
use roadwatch_core::ImageRGB8;

const W: usize = 160;
const H: usize = 120;
const TILE: usize = 40;
const SEED: u64 = 2024;
const FRAMES: usize = 10;

// (frame, class, x0, y0, x1, y1, conf) in pixels
const DAMAGE: [(usize, u32, usize, usize, usize, usize, f64); 7] = [
    (1, 1, 20, 102, 70, 108, 0.81),
    (2, 2, 90, 100, 130, 118, 0.47),
    (4, 3, 60, 104, 76, 116, 0.66),
    (5, 1, 10, 110, 40, 114, 0.18),
    (6, 1, 100, 101, 150, 106, 0.33),
    (7, 2, 30, 100, 80, 119, 0.92),
    (9, 3, 120, 103, 140, 117, 0.58),
];

fn timestamp(frame: usize) -> i64 {
    if frame == FRAMES - 1 {
        20_000
    } else {
        1000 * frame as i64 + 500
    }
}

fn norm(x0: usize, y0: usize, x1: usize, y1: usize) -> (f64, f64, f64, f64) {
    let (w, h) = (W as f64, H as f64);
    (
        (x0 + x1) as f64 / 2.0 / w,
        (y0 + y1) as f64 / 2.0 / h,
        (x1 - x0) as f64 / w,
        (y1 - y0) as f64 / h,
    )
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).expect("output directory").into();
    for sub in ["frames", "preds"] {
        std::fs::create_dir_all(out.join(sub)).unwrap();
    }
    let mut manifest = String::from("frame,timestamp_ms\n");
    let mut labels = String::from("crop_id,label,annotator,labeled_at_ms\n");
    let mut label_t = 1_700_000_000_000i64;
    for f in 0..FRAMES {
        let mut rng = stream(SEED, Purpose::Synthetic, 1000 + f as u64);
        let mut img = ImageRGB8::filled(W, H, [0, 0, 0]).unwrap();
        for y in 0..H {
            for x in 0..W {
                let road = if y >= 98 { 70 } else { 110 };
                let v = road + rng.random_range(0..12u8);
                img.set_pixel(x, y, [v, v, v.saturating_add(4)]);
            }
        }
        let mut preds = String::new();
        for slot in 0..3 {
            let idx = f * 3 + slot;
            let damaged = idx % 2 == 1;
            let tile = sign_crop(TILE, damaged, SEED, idx as u64);
            let tx = 8 + 52 * slot;
            let ty = rng.random_range(4..=56usize);
            for y in 0..TILE {
                for x in 0..TILE {
                    img.set_pixel(tx + x, ty + y, tile.pixel(x, y));
                }
            }
            let m = TILE / 10;
            let (cx, cy, w, h) = norm(tx + m, ty + m, tx + TILE - m, ty + TILE - m);
            let conf = 0.55 + 0.4 * rng.random::<f64>();
            let _ = writeln!(preds, "0 {cx:.6} {cy:.6} {w:.6} {h:.6} {conf:.6}");
            let p = PredBox { class_id: 0, cx, cy, w, h, conf };
            let id = crop_id(&frame_name(f), &crop_rect(&p, DEFAULT_MARGIN, W, H).unwrap(), 0);
            let label = if damaged { "damaged" } else { "undamaged" };
            if idx == 4 {
                // first pass mislabels this crop; the later row corrects it
                let wrong = if damaged { "undamaged" } else { "damaged" };
                let _ = writeln!(labels, "{id},{wrong},ann1,{label_t}");
                label_t += 1000;
            }
            let _ = writeln!(labels, "{id},{label},ann1,{label_t}");
            label_t += 1000;
        }
        for &(df, class, x0, y0, x1, y1, conf) in &DAMAGE {
            if df == f {
                for y in y0..y1 {
                    for x in x0..x1 {
                        if (x + y) % 3 == 0 {
                            img.set_pixel(x, y, [25, 25, 28]);
                        }
                    }
                }
                let (cx, cy, w, h) = norm(x0, y0, x1, y1);
                let _ = writeln!(preds, "{class} {cx:.6} {cy:.6} {w:.6} {h:.6} {conf:.6}");
            }
        }
        if f == 3 {
            // low-confidence sign detection on bare road
            let _ = writeln!(preds, "0 0.500000 0.900000 0.100000 0.100000 0.120000");
        }
        write_ppm(&img, out.join("frames").join(frame_name(f))).unwrap();
        std::fs::write(out.join("preds").join(format!("frame_{f:02}.txt")), preds).unwrap();
        let _ = writeln!(manifest, "{},{}", frame_name(f), timestamp(f));
    }
    std::fs::write(out.join("frames").join("manifest.csv"), manifest).unwrap();
    std::fs::write(out.join("labels.csv"), labels).unwrap();
    let mut gps = String::from("timestamp_ms,lat,lon\n");
    for i in 0..6 {
        let t = 2000 * i;
        let _ = writeln!(gps, "{t},{:.6},{:.6}", 45.4642 + 0.0004 * i as f64, 9.19 + 0.0006 * i as f64);
    }
    std::fs::write(out.join("gps.csv"), gps).unwrap();
}

fn frame_name(f: usize) -> String {
    format!("frame_{f:02}.ppm")
}
