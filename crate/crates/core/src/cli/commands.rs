use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use rayon::ThreadPool;

use super::options::{parse_bins, parse_cutoffs, parse_noise_model, parse_roi};
use super::{
    AnalyzeArgs, Cli, Command, EvaluateArgs, ImportArgs, LocateArgs, NoiseArgs, SegmentArgs, TrackArgs, UsageError,
};
use crate::analytics::{all_frame_stats, bin_diffusion, d_eff_with_lag, lifetime_stats, measure_size};
use crate::calibration::Calibration;
use crate::error::Error;
use crate::geometry::{f1_sweep, nms, BoundingBox, MetricsReport};
use crate::imaging::{add_noise, SegmentParams};
use crate::io::{
    import_plain_boxes, list_frames, read_detections, read_gray, read_trajectories, write_detections, write_gray,
    write_report, write_trajectories, Cell, DetectionFile, DriftRow, EvaluationRow, FileKind, GrowthRow, Header,
    ReportFormat, ReportRow,
};
use crate::linking::{apply_drift_correction, estimate_drift, link, DefectObservation, LinkParams, Trajectory};
use crate::locate::{locate, LocateParams};

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let cal = match &cli.calibration {
        Some(path) => {
            log::info!("calibration from {}", path.display());
            Calibration::from_json_file(path)?
        }
        None => Calibration::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build().context("building worker pool")?;
    match &cli.command {
        Command::Evaluate(a) => evaluate(a, &pool),
        Command::Segment(a) => segment(a, &cal, &pool),
        Command::Locate(a) => locate_frames(a, &cal, &pool),
        Command::Track(a) => track(a, &cal),
        Command::Analyze(a) => analyze(a, &cal, &pool),
        Command::Noise(a) => noise(a, &pool),
        Command::Import(a) => import(a),
    }
}

fn usage<T>(r: crate::Result<T>) -> Result<T> {
    r.map_err(|e| UsageError(e.to_string()).into())
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!("input directory {} does not exist", path.display());
    }
    Ok(())
}

fn base_header(schema: &str) -> Header {
    Header::new(schema).with("generator", concat!("defectrack ", env!("CARGO_PKG_VERSION")))
}

fn with_calibration(header: Header, cal: &Calibration) -> Header {
    header.with("calibration_hash", cal.fingerprint()).with_json("calibration", cal)
}

fn read_observations(path: &Path) -> Result<DetectionFile> {
    require_file(path)?;
    let (file, diagnostics) = read_detections(path)?;
    for d in &diagnostics {
        log::warn!("{}: {d}; record skipped", path.display());
    }
    Ok(file)
}

fn evaluate(args: &EvaluateArgs, pool: &ThreadPool) -> Result<()> {
    let cutoffs = usage(parse_cutoffs(&args.cutoffs))?;
    if let Some(t) = args.nms_iou {
        if !(0.0..=1.0).contains(&t) {
            return Err(UsageError(format!("--nms-iou {t} outside [0, 1]")).into());
        }
    }
    let preds = read_observations(&args.predictions)?;
    let truths = read_observations(&args.truths)?;

    let frames: Vec<u32> = preds.frames.keys().copied().filter(|f| truths.frames.contains_key(f)).collect();
    let only_pred = preds.frames.len() - frames.len();
    let only_truth = truths.frames.len() - frames.len();
    if only_pred > 0 || only_truth > 0 {
        log::warn!(
            "frame sets differ ({only_pred} only in predictions, {only_truth} only in truths); \
             evaluating the {} shared frames",
            frames.len()
        );
    }

    let per_frame: Vec<Vec<MetricsReport>> = pool.install(|| {
        frames
            .par_iter()
            .map(|f| -> crate::Result<Vec<MetricsReport>> {
                let mut boxes: Vec<BoundingBox> = preds.frames[f].iter().map(|o| o.bbox).collect();
                if let Some(t) = args.nms_iou {
                    let scores: Vec<f64> = preds.frames[f].iter().map(|o| o.confidence.unwrap_or(1.0)).collect();
                    let mut keep = nms(&boxes, &scores, t)?;
                    keep.sort_unstable();
                    boxes = keep.into_iter().map(|i| boxes[i]).collect();
                }
                let truth_boxes: Vec<BoundingBox> = truths.frames[f].iter().map(|o| o.bbox).collect();
                Ok(f1_sweep(&boxes, &truth_boxes, &cutoffs))
            })
            .collect::<crate::Result<_>>()
    })?;

    let mut rows = Vec::with_capacity((frames.len() + 1) * cutoffs.len());
    for (f, reports) in frames.iter().zip(&per_frame) {
        rows.extend(reports.iter().map(|m| EvaluationRow { frame: Some(*f), metrics: *m }));
    }
    for (k, &c) in cutoffs.iter().enumerate() {
        let pooled = MetricsReport::pooled(per_frame.iter().map(|r| &r[k]), c);
        rows.push(EvaluationRow { frame: None, metrics: pooled });
    }
    let header = base_header("defectrack-evaluation/1")
        .with("predictions", args.predictions.display().to_string())
        .with("truths", args.truths.display().to_string())
        .with("predictions_detector", preds.header.get("detector").unwrap_or("unknown"))
        .with_json("cutoffs", &cutoffs)
        .with("nms_iou", args.nms_iou.map_or("none".to_string(), |t| t.to_string()))
        .with("match_tie_break", "equal IoU resolved by lower prediction index, then lower truth index")
        .with("frames_evaluated", frames.len().to_string());
    write_report(&args.output, &header, &rows, ReportFormat::from_path(&args.output))?;
    if let Some(p) = rows.iter().rev().find(|r| (r.metrics.cutoff_iou - 0.15).abs() < 1e-12) {
        log::info!("pooled F1 at cutoff 0.15: {:.4}", p.metrics.f1);
    }
    Ok(())
}

fn segment(args: &SegmentArgs, cal: &Calibration, pool: &ThreadPool) -> Result<()> {
    require_dir(&args.frames)?;
    let mut file = read_observations(&args.detections)?;
    let frames = list_frames(&args.frames)?;
    let missing: Vec<String> = file.frames.keys().filter(|f| !frames.contains_key(f)).map(|f| f.to_string()).collect();
    if !missing.is_empty() {
        bail!("no image for detection frame(s) {} in {}", missing.join(", "), args.frames.display());
    }
    let params = SegmentParams { pad_px: args.pad, polarity: args.polarity.into(), ..SegmentParams::default() };
    usage(params.validate())?;

    let sized: Vec<(u32, Vec<DefectObservation>)> = pool.install(|| {
        file.frames
            .par_iter()
            .map(|(&f, list)| -> crate::Result<(u32, Vec<DefectObservation>)> {
                let img = read_gray(&frames[&f])?;
                let out = list
                    .iter()
                    .map(|o| {
                        let (size, status) = measure_size(&img, o, &params, cal)?;
                        let mut o = o.clone();
                        o.size_nm = Some(size);
                        o.fit = Some(status);
                        Ok(o)
                    })
                    .collect::<crate::Result<_>>()?;
                Ok((f, out))
            })
            .collect::<crate::Result<_>>()
    })?;
    file.frames = sized.into_iter().collect();
    let fallbacks =
        file.frames.values().flatten().filter(|o| o.fit == Some(crate::linking::FitStatus::Fallback)).count();
    if fallbacks > 0 {
        log::warn!("{fallbacks} of {} sizes fell back to the box extent", file.record_count());
    }
    file.header.set("calibration_hash", cal.fingerprint());
    file.header.set("calibration", serde_json::to_string(cal)?);
    file.header.set("segment_params", serde_json::to_string(&params)?);
    write_detections(&args.output, &file)?;
    Ok(())
}

fn locate_frames(args: &LocateArgs, cal: &Calibration, pool: &ThreadPool) -> Result<()> {
    require_dir(&args.frames)?;
    let params = LocateParams {
        feature_diameter_px: args.diameter,
        noise_scale_px: args.noise_scale,
        intensity_percentile: args.percentile,
        max_refine_iters: args.max_iters,
        polarity: args.polarity.into(),
        ..LocateParams::default()
    };
    usage(params.validate())?;
    let frames = list_frames(&args.frames)?;
    if frames.is_empty() {
        log::warn!("no frames in {}", args.frames.display());
    }
    let found: Vec<(u32, Vec<DefectObservation>)> = pool.install(|| {
        frames
            .par_iter()
            .map(|(&f, path)| -> crate::Result<(u32, Vec<DefectObservation>)> {
                let feats = locate(&read_gray(path)?, &params)?;
                let top = feats.iter().map(|x| x.mass).fold(0.0, f64::max);
                let obs = feats
                    .iter()
                    .map(|x| Ok(x.to_observation(f, &params)?.with_confidence(x.mass / top)))
                    .collect::<crate::Result<_>>()?;
                Ok((f, obs))
            })
            .collect::<crate::Result<_>>()
    })?;
    let mut file = DetectionFile::new(FileKind::Detections, found.into_iter().filter(|(_, v)| !v.is_empty()).collect());
    file.header =
        with_calibration(Header::new("defectrack-detections/1").with("detector", "crocker-grier-baseline"), cal)
            .with_json("locate_params", &params);
    write_detections(&args.output, &file)?;
    Ok(())
}

struct TrackSummary {
    trajectories: usize,
    observations: usize,
    mean_lifetime_frames: Option<f64>,
    first_frame: Option<u32>,
    last_frame: Option<u32>,
}

impl ReportRow for TrackSummary {
    fn columns() -> &'static [&'static str] {
        &["trajectories", "observations", "mean_lifetime_frames", "first_frame", "last_frame"]
    }

    fn cells(&self) -> Vec<Cell> {
        let frame = |f: Option<u32>| f.map_or(Cell::Empty, |f| Cell::Int(f as i64));
        vec![
            Cell::Int(self.trajectories as i64),
            Cell::Int(self.observations as i64),
            self.mean_lifetime_frames.into(),
            frame(self.first_frame),
            frame(self.last_frame),
        ]
    }
}

fn track(args: &TrackArgs, cal: &Calibration) -> Result<()> {
    let params =
        LinkParams { search_range_px: args.search_range, memory_frames: args.memory, max_subnetwork: args.max_subnet };
    usage(params.validate())?;
    let file = read_observations(&args.detections)?;
    fs::create_dir_all(&args.output_dir).map_err(|e| Error::io(&args.output_dir, e))?;

    let trajectories = link(&file.frames, &params)?;
    let drift = estimate_drift(&trajectories);
    let trajectories = if args.drift_correct { apply_drift_correction(&trajectories, &drift)? } else { trajectories };

    let header = with_calibration(base_header("defectrack-trajectories/1"), cal)
        .with("source", args.detections.display().to_string())
        .with("source_calibration_hash", file.header.get("calibration_hash").unwrap_or("none"))
        .with_json("link_params", &params)
        .with("drift_corrected", args.drift_correct.to_string());
    write_trajectories(args.output_dir.join("trajectories.csv"), &header, &trajectories)?;

    let drift_rows: Vec<DriftRow> =
        drift.offsets.iter().map(|(&frame, &(dx, dy))| DriftRow { frame, dx_px: dx, dy_px: dy }).collect();
    let mut drift_header = header.clone();
    drift_header.set("schema", "defectrack-drift/1");
    write_report(args.output_dir.join("drift.csv"), &drift_header, &drift_rows, ReportFormat::Csv)?;

    let (count, mean) = lifetime_stats(&trajectories);
    let summary = TrackSummary {
        trajectories: count,
        observations: trajectories.iter().map(|t| t.observations.len()).sum(),
        mean_lifetime_frames: mean,
        first_frame: trajectories.iter().map(Trajectory::first_frame).min(),
        last_frame: trajectories.iter().map(Trajectory::last_frame).max(),
    };
    let mut summary_header = header;
    summary_header.set("schema", "defectrack-track-summary/1");
    write_report(args.output_dir.join("summary.json"), &summary_header, &[summary], ReportFormat::Json)?;
    match mean {
        Some(m) => println!("{count} trajectories, mean lifetime {m:.2} frames"),
        None => println!("0 trajectories"),
    }
    Ok(())
}

fn analyze(args: &AnalyzeArgs, cal: &Calibration, pool: &ThreadPool) -> Result<()> {
    require_file(&args.trajectories)?;
    let roi = usage(args.roi.as_deref().map(parse_roi).transpose())?;
    let (lo, hi, bins) = usage(parse_bins(&args.bins))?;
    if args.lag == 0 {
        return Err(UsageError("--lag must be >= 1".into()).into());
    }
    let (source_header, mut trajectories) = read_trajectories(&args.trajectories)?;
    if let Some(roi) = &roi {
        for t in &mut trajectories {
            t.observations.retain(|o| roi.contains(o));
        }
        trajectories.retain(|t| !t.observations.is_empty());
    }
    if trajectories.is_empty() {
        log::warn!("no trajectories to analyze; writing header-only reports");
    }
    fs::create_dir_all(&args.output_dir).map_err(|e| Error::io(&args.output_dir, e))?;

    let mut header = with_calibration(base_header("defectrack-analysis/1"), cal)
        .with("source", args.trajectories.display().to_string())
        .with("roi", args.roi.clone().unwrap_or_else(|| "none".into()))
        .with("bins", format!("{lo}:{hi}:{bins}"))
        .with("lag_frames", args.lag.to_string());
    for key in ["link_params", "drift_corrected", "calibration_hash"] {
        if let Some(v) = source_header.get(key) {
            header.push(&format!("source_{key}"), v);
        }
    }
    let schema = |name: &str| {
        let mut h = header.clone();
        h.set("schema", format!("defectrack-{name}/1"));
        h
    };

    let mut by_frame: BTreeMap<u32, Vec<DefectObservation>> = BTreeMap::new();
    for o in trajectories.iter().flat_map(|t| &t.observations) {
        by_frame.entry(o.frame).or_default().push(o.clone());
    }
    let stats = all_frame_stats(&by_frame, cal)?;
    write_report(args.output_dir.join("frame_stats.csv"), &schema("frame-stats"), &stats, ReportFormat::Csv)?;

    let mut growth = Vec::new();
    let mut unsized_count = 0;
    for t in &trajectories {
        for o in &t.observations {
            match o.size_nm {
                Some(size_nm) => growth.push(GrowthRow {
                    trajectory_id: t.id,
                    frame: o.frame,
                    dpa: cal.frame_to_dpa(o.frame as u64),
                    size_nm,
                }),
                None => unsized_count += 1,
            }
        }
    }
    if unsized_count > 0 {
        log::warn!("{unsized_count} observations carry no size and are left out of growth curves");
    }
    write_report(args.output_dir.join("growth.csv"), &schema("growth"), &growth, ReportFormat::Csv)?;

    let outcomes: Vec<crate::Result<_>> =
        pool.install(|| trajectories.par_iter().map(|t| d_eff_with_lag(t, cal, args.lag)).collect());
    let mut records = Vec::new();
    let mut undefined = 0;
    for r in outcomes {
        match r {
            Ok(rec) => records.push(rec),
            Err(Error::UndefinedDiffusion(_)) => undefined += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if undefined > 0 {
        log::info!("{undefined} trajectories have no displacement at lag {}", args.lag);
    }
    write_report(args.output_dir.join("diffusion.csv"), &schema("diffusion"), &records, ReportFormat::Csv)?;
    let histogram = bin_diffusion(&records, lo, hi, bins)?;
    write_report(
        args.output_dir.join("diffusion_hist.csv"),
        &schema("diffusion-histogram"),
        &histogram,
        ReportFormat::Csv,
    )?;
    Ok(())
}

/// Per-frame stream seed (SplitMix64 finalizer over seed and frame index).
fn frame_seed(seed: u64, frame: u32) -> u64 {
    let mut z = seed.wrapping_add((frame as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct NoiseEntry {
    frame: u32,
    file: String,
    seed: u64,
}

impl ReportRow for NoiseEntry {
    fn columns() -> &'static [&'static str] {
        &["frame", "file", "seed"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![Cell::Int(self.frame as i64), Cell::Text(self.file.clone()), Cell::Text(self.seed.to_string())]
    }
}

fn noise(args: &NoiseArgs, pool: &ThreadPool) -> Result<()> {
    require_dir(&args.input)?;
    let model = usage(parse_noise_model(args.model, &args.params))?;
    fs::create_dir_all(&args.output).map_err(|e| Error::io(&args.output, e))?;
    let same = fs::canonicalize(&args.input)? == fs::canonicalize(&args.output)?;
    if same {
        return Err(UsageError("output directory must differ from the input directory".into()).into());
    }
    let frames = list_frames(&args.input)?;
    let entries: Vec<NoiseEntry> = pool.install(|| {
        frames
            .par_iter()
            .map(|(&f, path)| -> crate::Result<NoiseEntry> {
                let name = path.file_name().expect("listed files have names");
                let target: PathBuf = args.output.join(name);
                let seed = frame_seed(args.seed, f);
                if model.is_identity() {
                    fs::copy(path, &target).map_err(|e| Error::io(&target, e))?;
                } else {
                    write_gray(&target, &add_noise(&read_gray(path)?, model, seed)?)?;
                }
                Ok(NoiseEntry { frame: f, file: name.to_string_lossy().into_owned(), seed })
            })
            .collect::<crate::Result<_>>()
    })?;
    let header = base_header("defectrack-noise/1").with_json("model", &model).with("seed", args.seed.to_string());
    write_report(args.output.join("noise_manifest.json"), &header, &entries, ReportFormat::Json)?;
    Ok(())
}

fn import(args: &ImportArgs) -> Result<()> {
    require_file(&args.input)?;
    let kind = if args.detections { FileKind::Detections } else { FileKind::GroundTruth };
    let (mut file, diagnostics) = import_plain_boxes(&args.input, kind, args.pixel_indices)?;
    for d in &diagnostics {
        log::warn!("{}: {d}; record skipped", args.input.display());
    }
    file.header.push("source", args.input.display().to_string());
    file.header.push("pixel_indices", args.pixel_indices.to_string());
    if let Some(name) = &args.detector {
        file.header.push("detector", name.clone());
    }
    write_detections(&args.output, &file)?;
    log::info!("imported {} boxes, skipped {}", file.record_count(), diagnostics.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|f| frame_seed(7, f)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(frame_seed(7, 0), frame_seed(8, 0));
    }
}
