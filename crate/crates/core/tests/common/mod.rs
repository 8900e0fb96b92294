#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use defectrack::imaging::{GrayImage, Raster};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const BACKGROUND: f64 = 200.0;
pub const CONTRAST: f64 = 140.0;

/// Dark disks on a bright field, 4x4 supersampled edge coverage, plus
/// Gaussian noise of the given standard deviation. Disks must not overlap.
pub fn render_disks(
    w: usize,
    h: usize,
    disks: &[(f64, f64, f64)],
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> GrayImage {
    let mut clean = Raster::filled(w, h, BACKGROUND);
    for &(cx, cy, r) in disks {
        let x0 = (cx - r - 1.0).floor().max(0.0) as usize;
        let y0 = (cy - r - 1.0).floor().max(0.0) as usize;
        let x1 = ((cx + r + 1.0).ceil() as usize).min(w - 1);
        let y1 = ((cy + r + 1.0).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let mut covered = 0;
                for sy in 0..4 {
                    for sx in 0..4 {
                        let px = x as f64 + (sx as f64 + 0.5) / 4.0 - 0.5;
                        let py = y as f64 + (sy as f64 + 0.5) / 4.0 - 0.5;
                        if (px - cx).hypot(py - cy) <= r {
                            covered += 1;
                        }
                    }
                }
                if covered > 0 {
                    clean.set(x, y, BACKGROUND - CONTRAST * covered as f64 / 16.0);
                }
            }
        }
    }
    let normal = Normal::new(0.0, noise_sigma.max(1e-12)).unwrap();
    clean.map(|v| {
        let n = if noise_sigma > 0.0 { normal.sample(rng) } else { 0.0 };
        (v + n).round().clamp(0.0, 255.0) as u8
    })
}

/// Random non-overlapping disks with at least `gap` pixels between edges.
pub fn place_disks(
    w: usize,
    h: usize,
    count: usize,
    radius: (f64, f64),
    gap: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 10_000 {
        attempts += 1;
        let r = rng.random_range(radius.0..=radius.1);
        let margin = r + gap;
        if 2.0 * margin >= w.min(h) as f64 {
            continue;
        }
        let cx = rng.random_range(margin..w as f64 - margin);
        let cy = rng.random_range(margin..h as f64 - margin);
        if out.iter().all(|&(x, y, s)| (x - cx).hypot(y - cy) > r + s + gap) {
            out.push((cx, cy, r));
        }
    }
    out
}

pub fn run_cli(cwd: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_defectrack"))
        .current_dir(cwd)
        .args(args)
        .env_remove("DEFECTRACK_CALIBRATION")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs");
    out
}

pub fn run_ok(cwd: &Path, args: &[&str]) -> Output {
    let out = run_cli(cwd, args);
    assert!(out.status.success(), "defectrack {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn save_png(path: &Path, img: &GrayImage) {
    defectrack::io::write_gray(path, img).unwrap();
}

/// Ground-truth CSV text for disks as `(frame, cx, cy, r)` boxes.
pub fn truth_csv(boxes: &[(u32, f64, f64, f64)], with_confidence: bool) -> String {
    let mut s = if with_confidence {
        "# schema: defectrack-detections/1\n# detector: synthetic\nframe,x_min,y_min,x_max,y_max,confidence\n"
            .to_string()
    } else {
        "# schema: defectrack-groundtruth/1\nframe,x_min,y_min,x_max,y_max\n".to_string()
    };
    for &(f, cx, cy, r) in boxes {
        s.push_str(&format!("{f},{},{},{},{}", cx - r, cy - r, cx + r, cy + r));
        if with_confidence {
            s.push_str(",0.9");
        }
        s.push('\n');
    }
    s
}
