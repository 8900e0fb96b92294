//! Loop density, size distributions, growth curves, effective diffusion and
//! lifetimes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::imaging::{segment_defect, GrayImage, SegmentParams};
use crate::linking::{DefectObservation, FitStatus, Trajectory};

/// Visible-loop count converted to a volumetric density in cm^-3.
pub fn loop_density(count: usize, cal: &Calibration) -> f64 {
    cal.visibility_factor * count as f64 / cal.sample_volume_cm3()
}

/// Mean spacing `density^(-1/3)` in nm for a density in cm^-3.
pub fn mean_spacing_nm(density_cm3: f64) -> Result<f64> {
    if !(density_cm3 > 0.0 && density_cm3.is_finite()) {
        return Err(Error::Domain(format!("density must be positive, got {density_cm3}")));
    }
    Ok((density_cm3 * 1e-21).powf(-1.0 / 3.0))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(q1, median, q3)` by linear interpolation between order statistics at
/// rank `(n - 1) p`.
pub fn size_stats(sizes_nm: &[f64]) -> Result<(f64, f64, f64)> {
    if sizes_nm.is_empty() {
        return Err(Error::Argument("size statistics of an empty list".into()));
    }
    if sizes_nm.iter().any(|s| !s.is_finite()) {
        return Err(Error::Argument("non-finite size".into()));
    }
    let mut sorted = sizes_nm.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.5), quantile_sorted(&sorted, 0.75)))
}

/// Max, mean and population standard deviation of `|a - b| / b * 100`.
pub fn percent_difference_stats(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Argument("no pairs to compare".into()));
    }
    let diffs = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            if y == 0.0 {
                Err(Error::Argument("reference value is zero".into()))
            } else {
                Ok(((x - y) / y).abs() * 100.0)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = diffs.len() as f64;
    let max = diffs.iter().copied().fold(0.0, f64::max);
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok((max, mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRecord {
    pub trajectory_id: u64,
    pub d_eff_nm2_per_s: f64,
    /// Absent when no observation carries a size.
    pub median_size_nm: Option<f64>,
    pub lifetime_frames: u32,
    /// Displacement pairs averaged.
    pub pairs: usize,
}

/// Effective 2D diffusion coefficient from unit-lag displacements.
pub fn d_eff(traj: &Trajectory, cal: &Calibration) -> Result<DiffusionRecord> {
    d_eff_with_lag(traj, cal, 1)
}

/// Mean squared displacement over all observation pairs exactly `lag`
/// frames apart, divided by `4 lag tau`.
pub fn d_eff_with_lag(traj: &Trajectory, cal: &Calibration, lag: u32) -> Result<DiffusionRecord> {
    if lag == 0 {
        return Err(Error::Argument("lag must be >= 1".into()));
    }
    let by_frame: HashMap<u32, &DefectObservation> = traj.observations.iter().map(|o| (o.frame, o)).collect();
    let nm_per_px = 1.0 / cal.pixels_per_nm;
    let mut total = 0.0;
    let mut pairs = 0;
    for o in &traj.observations {
        if let Some(next) = o.frame.checked_add(lag).and_then(|f| by_frame.get(&f)) {
            let dx = (next.center_x - o.center_x) * nm_per_px;
            let dy = (next.center_y - o.center_y) * nm_per_px;
            total += dx * dx + dy * dy;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::UndefinedDiffusion(format!("trajectory {} has no pairs {lag} frame(s) apart", traj.id)));
    }
    let tau = lag as f64 * cal.seconds_per_frame();
    let sizes: Vec<f64> = traj.observations.iter().filter_map(|o| o.size_nm).collect();
    let median_size_nm = if sizes.is_empty() { None } else { Some(size_stats(&sizes)?.1) };
    Ok(DiffusionRecord {
        trajectory_id: traj.id,
        d_eff_nm2_per_s: total / pairs as f64 / (4.0 * tau),
        median_size_nm,
        lifetime_frames: traj.lifetime_frames(),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionBin {
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub count: usize,
    pub mean_d_eff: Option<f64>,
    /// Standard deviation of the mean; absent for bins with fewer than two records.
    pub sem_d_eff: Option<f64>,
}

/// Histogram of D_eff over median size with half-open bins `[lo, hi)`.
pub fn bin_diffusion(records: &[DiffusionRecord], lo: f64, hi: f64, bins: usize) -> Result<Vec<DiffusionBin>> {
    if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Argument(format!("invalid binning {lo}:{hi}:{bins}")));
    }
    let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for r in records {
        let Some(size) = r.median_size_nm else { continue };
        if !(size >= lo && size < hi) {
            continue;
        }
        // estimate, then settle against the exact edges
        let mut i = (((size - lo) / (hi - lo)) * bins as f64).floor() as usize;
        i = i.min(bins - 1);
        while i > 0 && size < edges[i] {
            i -= 1;
        }
        while i + 1 < bins && size >= edges[i + 1] {
            i += 1;
        }
        members[i].push(r.d_eff_nm2_per_s);
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let n = m.len();
            let mean = (n > 0).then(|| m.iter().sum::<f64>() / n as f64);
            let sem = mean.filter(|_| n > 1).map(|mu| {
                let var = m.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            });
            DiffusionBin { lo_nm: edges[i], hi_nm: edges[i + 1], count: n, mean_d_eff: mean, sem_d_eff: sem }
        })
        .collect())
}

/// Closed pixel ranges for region-of-interest filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Roi {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.0 <= x.1 && y.0 <= y.1) {
            return Err(Error::Argument(format!("empty region {x:?} x {y:?}")));
        }
        Ok(Self { x, y })
    }

    pub fn contains(&self, o: &DefectObservation) -> bool {
        (self.x.0..=self.x.1).contains(&o.center_x) && (self.y.0..=self.y.1).contains(&o.center_y)
    }
}

pub fn roi_filter(observations: &[DefectObservation], roi: &Roi) -> Vec<DefectObservation> {
    observations.iter().filter(|o| roi.contains(o)).cloned().collect()
}

/// `(dpa, size_nm)` per sized observation, plus the number skipped for
/// lacking a size.
pub fn growth_curve(traj: &Trajectory, cal: &Calibration) -> (Vec<(f64, f64)>, usize) {
    let mut skipped = 0;
    let curve = traj
        .observations
        .iter()
        .filter_map(|o| match o.size_nm {
            Some(s) => Some((cal.frame_to_dpa(o.frame as u64), s)),
            None => {
                skipped += 1;
                None
            }
        })
        .collect();
    (curve, skipped)
}

/// Trajectory count and mean lifetime in frames (absent for no trajectories).
pub fn lifetime_stats(trajectories: &[Trajectory]) -> (usize, Option<f64>) {
    let n = trajectories.len();
    if n == 0 {
        return (0, None);
    }
    let total: u64 = trajectories.iter().map(|t| t.lifetime_frames() as u64).sum();
    (n, Some(total as f64 / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frame: u32,
    pub dpa: f64,
    pub raw_count: usize,
    pub corrected_density_cm3: f64,
    pub size_q1_nm: Option<f64>,
    pub size_median_nm: Option<f64>,
    pub size_q3_nm: Option<f64>,
}

pub fn frame_stats(frame: u32, observations: &[DefectObservation], cal: &Calibration) -> Result<FrameStats> {
    let sizes: Vec<f64> = observations.iter().filter_map(|o| o.size_nm).collect();
    let q = if sizes.is_empty() { None } else { Some(size_stats(&sizes)?) };
    Ok(FrameStats {
        frame,
        dpa: cal.frame_to_dpa(frame as u64),
        raw_count: observations.len(),
        corrected_density_cm3: loop_density(observations.len(), cal),
        size_q1_nm: q.map(|q| q.0),
        size_median_nm: q.map(|q| q.1),
        size_q3_nm: q.map(|q| q.2),
    })
}

pub fn all_frame_stats(frames: &BTreeMap<u32, Vec<DefectObservation>>, cal: &Calibration) -> Result<Vec<FrameStats>> {
    frames.iter().map(|(&f, obs)| frame_stats(f, obs, cal)).collect()
}

/// Defect size in nm from the fitted ellipse's major axis, falling back to
/// the longer box side when segmentation or fitting fails.
pub fn measure_size(
    img: &GrayImage,
    obs: &DefectObservation,
    params: &SegmentParams,
    cal: &Calibration,
) -> Result<(f64, FitStatus)> {
    let fitted = segment_defect(img, &obs.bbox, params).and_then(|seg| seg.fit_ellipse());
    match fitted {
        Ok(fit) => Ok((cal.px_to_nm(fit.major_axis)?, FitStatus::Fitted)),
        Err(Error::SegmentationFailed(msg)) | Err(Error::FitFailed(msg)) => {
            log::debug!("frame {}: size fallback ({msg})", obs.frame);
            Ok((cal.px_to_nm(obs.bbox.width().max(obs.bbox.height()))?, FitStatus::Fallback))
        }
        Err(e) => Err(e),
    }
}
