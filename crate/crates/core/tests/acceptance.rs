//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use defectrack::analytics::{bin_diffusion, d_eff, loop_density, mean_spacing_nm};
use defectrack::cli::parse_bins;
use defectrack::geometry::{f1_sweep, greedy_match, MetricsReport};
use defectrack::imaging::{add_noise, fit_ellipse, otsu_threshold, segment_defect, NoiseModel, Raster, SegmentParams};
use defectrack::linking::{apply_drift_correction, estimate_drift, link, LinkParams, Linker};
use defectrack::{BoundingBox, Calibration, DefectObservation, Trajectory};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, budget_s: f64, detail: String) -> Outcome {
    check(elapsed.as_secs_f64() < budget_s, format!("{detail}; {:.2} s of {budget_s} s budget", elapsed.as_secs_f64()))
}

// 1
fn calibration_exactness() -> Outcome {
    let start = Instant::now();
    let cal = Calibration::default();
    let d0 = cal.frame_to_dpa(0);
    let d1175 = cal.frame_to_dpa(1175);
    let spf = cal.seconds_per_frame();
    let fov = cal.px_to_nm(1344.0).map_err(|e| e.to_string())?;
    let ok = (d0 - 0.8534).abs() <= 1e-9
        && (d1175 - 2.5).abs() <= 1e-9
        && format!("{spf:.2}") == "1.75"
        && format!("{fov:.2}") == "499.93";
    let detail = format!("dpa(0)={d0:.10}, dpa(1175)={d1175:.10}, s/frame={spf:.5}, 1344 px={fov:.4} nm");
    check(ok, detail).and_then(|d| within_budget(start.elapsed(), 1.0, d))
}

fn rand_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let x = rng.random_range(0..20) as f64;
    let y = rng.random_range(0..20) as f64;
    let w = rng.random_range(1..10) as f64;
    let h = rng.random_range(1..10) as f64;
    BoundingBox::new(x, y, x + w, y + h).unwrap()
}

fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
    inter / union
}

/// Rescan the whole matrix for its maximum after every pairing.
fn oracle_greedy(preds: &[BoundingBox], truths: &[BoundingBox], cutoff: f64) -> Vec<(usize, usize)> {
    let mut used_p = vec![false; preds.len()];
    let mut used_t = vec![false; truths.len()];
    let mut pairs = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, p) in preds.iter().enumerate() {
            for (j, t) in truths.iter().enumerate() {
                if used_p[i] || used_t[j] {
                    continue;
                }
                let v = oracle_iou(p, t);
                if v > 0.0 && v >= cutoff && best.is_none_or(|b| v > b.2) {
                    best = Some((i, j, v));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        used_p[i] = true;
        used_t[j] = true;
        pairs.push((i, j));
    }
    pairs
}

// 2
fn greedy_matching_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut checks = 0;
    for _ in 0..1000 {
        let np = rng.random_range(0..=8);
        let nt = rng.random_range(0..=8);
        let preds: Vec<_> = (0..np).map(|_| rand_box(&mut rng)).collect();
        let truths: Vec<_> = (0..nt).map(|_| rand_box(&mut rng)).collect();
        for cutoff in [0.05, 0.15, 0.5] {
            checks += 1;
            let got: Vec<(usize, usize)> =
                greedy_match(&preds, &truths, cutoff).pairs.iter().map(|p| (p.0, p.1)).collect();
            if got != oracle_greedy(&preds, &truths, cutoff) {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches in {checks} instance-cutoff pairs"))
        .and_then(|d| within_budget(start.elapsed(), 10.0, d))
}

// 3
fn f1_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cutoffs: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let mut violations = 0;
    for _ in 0..200 {
        let preds: Vec<_> = (0..rng.random_range(0..=12)).map(|_| rand_box(&mut rng)).collect();
        let truths: Vec<_> = (0..rng.random_range(0..=12)).map(|_| rand_box(&mut rng)).collect();
        let sweep = f1_sweep(&preds, &truths, &cutoffs);
        violations += sweep.windows(2).filter(|w| w[1].f1 > w[0].f1).count();
    }
    check(violations == 0, format!("{violations} violations over 200 instances x 19 cutoffs"))
}

// 4
fn metrics_arithmetic() -> Outcome {
    // (tp, fp, fn) -> precision, recall, F1 worked by hand
    let table: [(usize, usize, usize, f64, f64, f64); 10] = [
        (8, 1, 1, 8.0 / 9.0, 8.0 / 9.0, 8.0 / 9.0),
        (0, 0, 0, 0.0, 0.0, 0.0),
        (10, 0, 0, 1.0, 1.0, 1.0),
        (0, 5, 0, 0.0, 0.0, 0.0),
        (0, 0, 5, 0.0, 0.0, 0.0),
        (3, 1, 2, 0.75, 0.6, 2.0 / 3.0),
        (5, 5, 0, 0.5, 1.0, 2.0 / 3.0),
        (1, 0, 9, 1.0, 0.1, 2.0 / 11.0),
        (7, 3, 3, 0.7, 0.7, 0.7),
        (89, 11, 11, 0.89, 0.89, 0.89),
    ];
    let mut bad = Vec::new();
    for (tp, fp, fn_, p, r, f1) in table {
        let m = MetricsReport::from_counts(tp, fp, fn_, 0.15);
        if (m.precision - p).abs() > 1e-12 || (m.recall - r).abs() > 1e-12 || (m.f1 - f1).abs() > 1e-12 {
            bad.push(format!("({tp},{fp},{fn_})"));
        }
    }
    let headline = MetricsReport::from_counts(8, 1, 1, 0.15).f1;
    check(bad.is_empty(), format!("10 cases, mismatched {bad:?}; tp=8 fp=1 fn=1 gives F1={headline:.12}"))
}

fn oracle_otsu(img: &Raster<u8>) -> Option<u8> {
    let mut best: Option<(u8, BigRational)> = None;
    for t in 0..=254u8 {
        let (mut n0, mut s0, mut n1, mut s1) = (0i64, 0i64, 0i64, 0i64);
        for &v in img.pixels() {
            if v <= t {
                n0 += 1;
                s0 += v as i64;
            } else {
                n1 += 1;
                s1 += v as i64;
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let mu0 = BigRational::new(BigInt::from(s0), BigInt::from(n0));
        let mu1 = BigRational::new(BigInt::from(s1), BigInt::from(n1));
        let diff = mu0 - mu1;
        let var = diff.clone() * diff * BigRational::from_integer(BigInt::from(n0 * n1));
        if best.as_ref().is_none_or(|b| var > b.1) {
            best = Some((t, var));
        }
    }
    best.map(|b| b.0)
}

// 5
fn otsu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for i in 0..100 {
        let img = match i % 4 {
            0 => Raster::from_fn(64, 64, |_, _| rng.random::<u8>()),
            1 => {
                let (a, b): (f64, f64) = (rng.random_range(20.0..100.0), rng.random_range(140.0..230.0));
                let noise = Normal::new(0.0, rng.random_range(2.0..25.0)).unwrap();
                Raster::from_fn(64, 64, |x, _| {
                    let m = if x < 32 { a } else { b };
                    (m + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8
                })
            }
            2 => {
                let levels: Vec<u8> = (0..rng.random_range(2..5)).map(|_| rng.random()).collect();
                Raster::from_fn(64, 64, |_, _| levels[rng.random_range(0..levels.len())])
            }
            _ => {
                let lo = rng.random_range(0..200u8);
                Raster::from_fn(64, 64, |_, _| rng.random_range(lo..=lo.saturating_add(40)))
            }
        };
        if otsu_threshold(&img).ok() != oracle_otsu(&img) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches in 100 images"))
}

// 6
fn segmentation_fidelity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sigma = common::CONTRAST / 5.0;
    let (mut total, mut good) = (0usize, 0usize);
    let mut worst: Vec<String> = Vec::new();
    for _ in 0..50 {
        let disks = common::place_disks(200, 200, 6, (3.0, 20.0), 10.0, &mut rng);
        let img = common::render_disks(200, 200, &disks, sigma, &mut rng);
        for &(cx, cy, r) in &disks {
            total += 1;
            let bbox = BoundingBox::new(cx - r, cy - r, cx + r, cy + r).unwrap();
            let fit = segment_defect(&img, &bbox, &SegmentParams::default()).and_then(|s| s.fit_ellipse());
            let d = 2.0 * r;
            match fit {
                Ok(f) if (f.major_axis - d).abs() <= (0.1 * d).max(1.0) => good += 1,
                Ok(f) => worst.push(format!("d={d:.1}->{:.1}", f.major_axis)),
                Err(e) => worst.push(format!("d={d:.1}: {e}")),
            }
        }
    }
    let frac = good as f64 / total as f64;
    worst.truncate(3);
    check(
        frac >= 0.95,
        format!("{good}/{total} disks ({:.1}%) within tolerance at SNR 5; misses {worst:?}", 100.0 * frac),
    )
    .and_then(|d| within_budget(start.elapsed(), 30.0, d))
}

// 7
fn ellipse_fit() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, theta) in [0.0f64, 0.4, 1.1, 2.3].into_iter().enumerate() {
        let (cx, cy) = (30.0 + 7.0 * k as f64, -12.5 + k as f64);
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 50.0;
                let (u, v) = (10.0 * t.cos(), 4.0 * t.sin());
                (cx + u * theta.cos() - v * theta.sin(), cy + u * theta.sin() + v * theta.cos())
            })
            .collect();
        let fit = fit_ellipse(&pts).map_err(|e| e.to_string())?;
        worst = worst.max((fit.major_axis / 20.0 - 1.0).abs()).max((fit.minor_axis / 8.0 - 1.0).abs());
    }
    check(worst <= 1e-6, format!("worst relative axis error {worst:.2e}"))
}

fn obs(frame: u32, x: f64, y: f64) -> DefectObservation {
    DefectObservation::new(frame, BoundingBox::centered(x, y, 3.0, 3.0).unwrap())
}

fn random_scene(rng: &mut ChaCha8Rng, range: f64) -> BTreeMap<u32, Vec<DefectObservation>> {
    let mut alive: Vec<(f64, f64)> = Vec::new();
    let mut frames = BTreeMap::new();
    for f in 0..4u32 {
        alive.retain(|_| rng.random::<f64>() < 0.85);
        for p in &mut alive {
            let step = rng.random_range(0.0..range * 0.999);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            p.0 += step * angle.cos();
            p.1 += step * angle.sin();
        }
        while alive.len() < 5 && rng.random::<f64>() < 0.6 {
            alive.push((rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)));
        }
        frames.insert(f, alive.iter().map(|&(x, y)| obs(f, x, y)).collect());
    }
    frames
}

/// Every partial one-to-one assignment within range, in lexicographic order
/// (destination ascending, unlinked last).
fn enumerate_assignments(src: &[(f64, f64)], dst: &[(f64, f64)], range: f64) -> Vec<(Vec<Option<usize>>, f64)> {
    fn rec(
        k: usize,
        src: &[(f64, f64)],
        dst: &[(f64, f64)],
        r2: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        out: &mut Vec<(Vec<Option<usize>>, f64)>,
    ) {
        if k == src.len() {
            let mut cost = 0.0;
            let mut linked = 0;
            for (i, c) in cur.iter().enumerate() {
                match c {
                    Some(j) => {
                        linked += 1;
                        cost += (src[i].0 - dst[*j].0).powi(2) + (src[i].1 - dst[*j].1).powi(2);
                    }
                    None => cost += r2,
                }
            }
            cost += (dst.len() - linked) as f64 * r2;
            out.push((cur.clone(), cost));
            return;
        }
        for j in 0..dst.len() {
            let d2 = (src[k].0 - dst[j].0).powi(2) + (src[k].1 - dst[j].1).powi(2);
            if used[j] || d2 > r2 {
                continue;
            }
            used[j] = true;
            cur[k] = Some(j);
            rec(k + 1, src, dst, r2, used, cur, out);
            used[j] = false;
        }
        cur[k] = None;
        rec(k + 1, src, dst, r2, used, cur, out);
    }
    let mut out = Vec::new();
    rec(0, src, dst, range * range, &mut vec![false; dst.len()], &mut vec![None; src.len()], &mut out);
    out
}

fn oracle_link(frames: &BTreeMap<u32, Vec<DefectObservation>>, range: f64, memory: u32) -> Vec<Trajectory> {
    let mut active: Vec<(u64, f64, f64, u32)> = Vec::new();
    let mut trajs: Vec<Trajectory> = Vec::new();
    for (&f, list) in frames {
        let mut list = list.clone();
        list.sort_by(|a, b| a.center_x.total_cmp(&b.center_x).then(a.center_y.total_cmp(&b.center_y)));
        active.retain(|t| f - t.3 <= memory + 1);
        let src: Vec<_> = active.iter().map(|t| (t.1, t.2)).collect();
        let dst: Vec<_> = list.iter().map(|o| (o.center_x, o.center_y)).collect();
        let mut best: (f64, Vec<Option<usize>>) = (f64::INFINITY, Vec::new());
        for (a, c) in enumerate_assignments(&src, &dst, range) {
            if c < best.0 {
                best = (c, a);
            }
        }
        let mut claimed = vec![false; dst.len()];
        for (t, c) in active.iter_mut().zip(&best.1) {
            if let Some(j) = *c {
                claimed[j] = true;
                *t = (t.0, dst[j].0, dst[j].1, f);
                trajs[t.0 as usize].observations.push(list[j].clone());
            }
        }
        for (j, o) in list.into_iter().enumerate() {
            if !claimed[j] {
                let id = trajs.len() as u64;
                active.push((id, o.center_x, o.center_y, f));
                trajs.push(Trajectory { id, observations: vec![o] });
            }
        }
    }
    trajs
}

// 8
fn linking_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut mismatched, mut cost_violations, mut transitions) = (0, 0, 0);
    for _ in 0..500 {
        let range = rng.random_range(4.0..12.0);
        let memory = rng.random_range(0..=3);
        let frames = random_scene(&mut rng, range);
        let params = LinkParams { search_range_px: range, memory_frames: memory, max_subnetwork: 64 };
        let got = link(&frames, &params).map_err(|e| e.to_string())?;
        if got != oracle_link(&frames, range, memory) {
            mismatched += 1;
        }
        let mut linker = Linker::new(params).map_err(|e| e.to_string())?;
        for (&f, list) in &frames {
            let report = linker.step(f, list.clone()).map_err(|e| e.to_string())?;
            transitions += 1;
            let src: Vec<_> = report.sources.iter().map(|s| (s.1, s.2)).collect();
            for (_, alt) in enumerate_assignments(&src, &report.destinations, range) {
                if report.cost > alt + 1e-9 {
                    cost_violations += 1;
                }
            }
        }
    }
    check(
        mismatched == 0 && cost_violations == 0,
        format!("{mismatched}/500 scenes differ from the oracle; {cost_violations} cheaper alternatives over {transitions} transitions"),
    )
    .and_then(|d| within_budget(start.elapsed(), 30.0, d))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// 9
fn drift_correction() -> Outcome {
    let (vx, vy) = (2.0, -1.0);
    let mut frames = BTreeMap::new();
    for f in 0..12u32 {
        let list: Vec<_> = (0..6)
            .map(|i| obs(f, 40.0 + 25.0 * i as f64 + vx * f as f64, 60.0 + 7.0 * (i % 3) as f64 + vy * f as f64))
            .collect();
        frames.insert(f, list);
    }
    let trajs = link(&frames, &LinkParams::default()).map_err(|e| e.to_string())?;
    let drift = estimate_drift(&trajs);
    let corrected = apply_drift_correction(&trajs, &drift).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for f in 1..12u32 {
        let (mut dx, mut dy) = (Vec::new(), Vec::new());
        for t in &corrected {
            for w in t.observations.windows(2) {
                if w[0].frame + 1 == f && w[1].frame == f {
                    dx.push(w[1].center_x - w[0].center_x);
                    dy.push(w[1].center_y - w[0].center_y);
                }
            }
        }
        if dx.is_empty() {
            return Err(format!("no linked pairs into frame {f}"));
        }
        worst = worst.max(median(dx).abs()).max(median(dy).abs());
    }
    check(
        trajs.len() == 6 && worst <= 1e-9,
        format!("{} trajectories; worst corrected median step {worst:.1e} px", trajs.len()),
    )
}

// 10
fn diffusion_estimator() -> Outcome {
    let cal = Calibration::default();
    let tau = cal.seconds_per_frame();
    let nm = 1.0 / cal.pixels_per_nm;
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let s = 0.5 + 0.1 * seed as f64;
        let step = Normal::new(0.0, s).unwrap();
        let (mut x, mut y) = (600.0, 400.0);
        let mut list = vec![obs(0, x, y)];
        for f in 1..=1000u32 {
            x += step.sample(&mut rng);
            y += step.sample(&mut rng);
            list.push(obs(f, x, y));
        }
        let d = d_eff(&Trajectory { id: seed, observations: list }, &cal).map_err(|e| e.to_string())?.d_eff_nm2_per_s;
        let expected = (s * nm).powi(2) / (2.0 * tau);
        let rel = (d / expected - 1.0).abs();
        worst = worst.max(rel);
        if rel <= 0.15 {
            passed += 1;
        }
    }
    let still = Trajectory { id: 99, observations: (0..10).map(|f| obs(f, 12.25, 7.5)).collect() };
    let zero = d_eff(&still, &cal).map_err(|e| e.to_string())?.d_eff_nm2_per_s;
    check(
        passed == 20 && zero == 0.0,
        format!("{passed}/20 seeds within 15% (worst {:.1}%); stationary d_eff={zero}", 100.0 * worst),
    )
}

// 11
fn density_arithmetic() -> Outcome {
    let cal = Calibration::default();
    let hand = 1.75 * 100.0 / (416.6 * 264.0 * 75.0 * 1e-21);
    let d = loop_density(100, &cal);
    let spacing = mean_spacing_nm(3e16).map_err(|e| e.to_string())?;
    let ok = (d / hand - 1.0).abs() < 1e-12 && (d / 2.12e16 - 1.0).abs() <= 0.01 && spacing.round() == 32.0;
    check(ok, format!("density(100)={d:.4e} cm^-3 (hand {hand:.4e}); spacing(3e16)={spacing:.2} nm"))
}

// 12
fn histogram_geometry() -> Outcome {
    let (lo, hi, n) = parse_bins("2:18:50").map_err(|e| e.to_string())?;
    let bins = bin_diffusion(&[], lo, hi, n).map_err(|e| e.to_string())?;
    let width_err = bins.iter().map(|b| (b.hi_nm - b.lo_nm - 0.32).abs()).fold(0.0, f64::max);
    let contiguous = bins.windows(2).all(|w| w[0].hi_nm == w[1].lo_nm);
    let ok = bins.len() == 50 && bins[0].lo_nm == 2.0 && bins[49].hi_nm == 18.0 && contiguous && width_err < 1e-12;
    check(
        ok,
        format!(
            "{} bins over [{}, {}), max width deviation from 0.32 nm {width_err:.1e}",
            bins.len(),
            bins[0].lo_nm,
            bins[bins.len() - 1].hi_nm
        ),
    )
}

fn build_fixture(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).unwrap();
    let base = common::place_disks(160, 120, 5, (4.0, 9.0), 14.0, &mut rng);
    let mut truth = Vec::new();
    for f in 0..8u32 {
        let disks: Vec<_> =
            base.iter().map(|&(x, y, r)| (x + 0.6 * f as f64, y - 0.3 * f as f64, r + 0.1 * f as f64)).collect();
        let img = common::render_disks(170, 120, &disks, 6.0, &mut rng);
        common::save_png(&frames.join(format!("frame_{f:03}.png")), &img);
        truth.extend(disks.iter().map(|&(x, y, r)| (f, x, y, r)));
    }
    std::fs::write(dir.join("truth.csv"), common::truth_csv(&truth, false)).unwrap();
    std::fs::write(dir.join("det.csv"), common::truth_csv(&truth, true)).unwrap();
    let plain: String = common::truth_csv(&truth, false).lines().skip(1).map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.join("plain.csv"), plain).unwrap();
}

fn run_pipeline(dir: &Path, threads: &str) -> Result<(), String> {
    let steps: [&[&str]; 7] = [
        &["import", "--input", "plain.csv", "--output", "imported.csv"],
        &[
            "noise",
            "--input",
            "frames",
            "--output",
            "noisy",
            "--model",
            "saltpepper",
            "--params",
            "amount=0.01",
            "--seed",
            "4",
        ],
        &["locate", "--frames", "noisy", "--output", "located.csv", "--diameter", "9", "--polarity", "dark"],
        &[
            "evaluate",
            "--predictions",
            "located.csv",
            "--truths",
            "imported.csv",
            "--output",
            "eval.csv",
            "--nms-iou",
            "0.45",
        ],
        &["segment", "--frames", "frames", "--detections", "det.csv", "--output", "sized.csv"],
        &["track", "--detections", "sized.csv", "--output-dir", "tracks", "--drift-correct"],
        &["analyze", "--trajectories", "tracks/trajectories.csv", "--output-dir", "analysis"],
    ];
    for step in steps {
        let mut args: Vec<&str> = step.to_vec();
        args.extend(["--threads", threads]);
        let out = common::run_cli(dir, &args);
        if !out.status.success() {
            return Err(format!("{} failed: {}", step[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn collect_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

// 13
fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut snapshots = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "8"), ("c", "8")] {
        let dir = tmp.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        build_fixture(&dir);
        run_pipeline(&dir, threads)?;
        snapshots.push(collect_files(&dir));
    }
    let files = snapshots[0].len();
    let differing: Vec<&String> = snapshots[0]
        .iter()
        .filter(|(k, v)| snapshots[1].get(*k) != Some(v) || snapshots[2].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    let same_sets = snapshots[0].keys().eq(snapshots[1].keys()) && snapshots[0].keys().eq(snapshots[2].keys());
    check(
        same_sets && differing.is_empty() && files > 20,
        format!(
            "{files} files from 7 subcommands identical across --threads 1, 8 and a rerun; differing {differing:?}"
        ),
    )
}

// 14
fn noise_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let img = Raster::from_fn(1000, 1000, |_, _| rng.random_range(1..=254u8));
    let mut identical = true;
    for model in [
        NoiseModel::Gaussian { variance: 0.0 },
        NoiseModel::SaltPepper { amount: 0.0, ratio: 0.5 },
        NoiseModel::Poisson { peak: f64::INFINITY },
    ] {
        identical &= add_noise(&img, model, 99).map_err(|e| e.to_string())? == img;
    }
    let noisy = add_noise(&img, NoiseModel::SaltPepper { amount: 0.1, ratio: 0.5 }, 99).map_err(|e| e.to_string())?;
    let changed = img.pixels().iter().zip(noisy.pixels()).filter(|(a, b)| a != b).count();
    let frac = changed as f64 / img.len() as f64;
    check(
        identical && (frac - 0.1).abs() <= 0.01,
        format!("zero-magnitude identity: {identical}; amount 0.1 corrupted {:.3}% of 1 Mpx", 100.0 * frac),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("calibration exactness", calibration_exactness),
        ("greedy matching oracle", greedy_matching_oracle),
        ("F1 monotonicity over cutoffs", f1_monotonicity),
        ("metrics arithmetic", metrics_arithmetic),
        ("Otsu oracle", otsu_oracle),
        ("segmentation fidelity", segmentation_fidelity),
        ("ellipse fit", ellipse_fit),
        ("linking oracle", linking_oracle),
        ("drift correction", drift_correction),
        ("diffusion estimator", diffusion_estimator),
        ("density arithmetic", density_arithmetic),
        ("histogram geometry", histogram_geometry),
        ("CLI determinism", cli_determinism),
        ("noise identity", noise_identity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
