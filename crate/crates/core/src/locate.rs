//! Detector-free feature location: band-pass filtering, local-maximum
//! candidates and iterative centroid refinement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{FloatImage, GrayImage, Polarity};
use crate::linking::DefectObservation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocateParams {
    /// Odd feature size in pixels (>= 3).
    pub feature_diameter_px: usize,
    /// Gaussian smoothing scale for pixel noise.
    pub noise_scale_px: f64,
    /// Candidates must reach this percentile of the non-zero filtered pixels.
    pub intensity_percentile: f64,
    pub max_refine_iters: usize,
    pub convergence_px: f64,
    pub polarity: Polarity,
}

impl Default for LocateParams {
    fn default() -> Self {
        Self {
            feature_diameter_px: 7,
            noise_scale_px: 1.0,
            intensity_percentile: 64.0,
            max_refine_iters: 10,
            convergence_px: 0.005,
            polarity: Polarity::Dark,
        }
    }
}

impl LocateParams {
    pub fn validate(&self) -> Result<()> {
        if self.feature_diameter_px < 3 || self.feature_diameter_px.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "feature diameter must be odd and >= 3, got {}",
                self.feature_diameter_px
            )));
        }
        if !(0.0..=100.0).contains(&self.intensity_percentile) {
            return Err(Error::Argument(format!("percentile {} outside [0, 100]", self.intensity_percentile)));
        }
        if !(self.noise_scale_px > 0.0) || !(self.convergence_px > 0.0) {
            return Err(Error::Argument("noise scale and convergence must be positive".into()));
        }
        Ok(())
    }

    fn radius(&self) -> usize {
        self.feature_diameter_px / 2
    }
}

/// A refined feature position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    /// Total filtered intensity inside the mask.
    pub mass: f64,
    /// Radius of gyration in pixels.
    pub size: f64,
}

impl Feature {
    /// A detection box of one feature diameter around the centre.
    pub fn to_observation(&self, frame: u32, params: &LocateParams) -> Result<DefectObservation> {
        let d = params.feature_diameter_px as f64;
        let bbox = BoundingBox::centered(self.x, self.y, d, d)?;
        Ok(DefectObservation::new(frame, bbox))
    }
}

/// Mirror index with the edge sample repeated (`d c b a | a b c d | d c b a`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn convolve_separable(img: &FloatImage, kernel: &[f64]) -> FloatImage {
    let (w, h) = (img.width(), img.height());
    let r = (kernel.len() / 2) as i64;
    let horizontal = FloatImage::from_fn(w, h, |x, y| {
        kernel.iter().enumerate().map(|(k, &c)| c * img.get(reflect(x as i64 + k as i64 - r, w), y)).sum()
    });
    FloatImage::from_fn(w, h, |x, y| {
        kernel.iter().enumerate().map(|(k, &c)| c * horizontal.get(x, reflect(y as i64 + k as i64 - r, h))).sum()
    })
}

/// Gaussian smoothing at the noise scale minus a boxcar mean over the
/// feature diameter, clipped at zero.
pub fn bandpass(img: &FloatImage, params: &LocateParams) -> Result<FloatImage> {
    params.validate()?;
    if params.feature_diameter_px >= img.width().min(img.height()) {
        return Err(Error::Argument(format!(
            "feature diameter {} does not fit a {}x{} image",
            params.feature_diameter_px,
            img.width(),
            img.height()
        )));
    }
    let sigma = params.noise_scale_px;
    let gr = (4.0 * sigma).ceil() as i64;
    let mut gauss: Vec<f64> = (-gr..=gr).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = gauss.iter().sum();
    gauss.iter_mut().for_each(|g| *g /= total);
    let d = params.feature_diameter_px;
    let boxcar = vec![1.0 / d as f64; d];

    let smooth = convolve_separable(img, &gauss);
    let background = convolve_separable(img, &boxcar);
    // rounding residue of two unit-sum kernels on flat regions
    let floor = 1e-9 * img.pixels().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let data =
        smooth.pixels().iter().zip(background.pixels()).map(|(s, b)| if s - b > floor { s - b } else { 0.0 }).collect();
    FloatImage::from_vec(img.width(), img.height(), data)
}

/// Linear-interpolation percentile of an unsorted sample.
fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

fn disk_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).filter(|&(dx, dy)| dx * dx + dy * dy <= r * r).collect()
}

/// Local maxima within a disk of radius `diameter / 2`, at least that far
/// from the border and at or above the intensity percentile. On plateaus the
/// first pixel in raster order wins.
pub fn find_candidates(filtered: &FloatImage, params: &LocateParams) -> Result<Vec<(usize, usize)>> {
    params.validate()?;
    let mut nonzero: Vec<f64> = filtered.pixels().iter().copied().filter(|&v| v > 0.0).collect();
    if nonzero.is_empty() {
        return Ok(Vec::new());
    }
    let threshold = percentile(&mut nonzero, params.intensity_percentile);
    let r = params.radius();
    let footprint = disk_offsets(r);
    let (w, h) = (filtered.width(), filtered.height());
    if w <= 2 * r || h <= 2 * r {
        return Ok(Vec::new());
    }

    let mut peaks = Vec::new();
    for y in r..h - r {
        for x in r..w - r {
            let v = filtered.get(x, y);
            if v <= 0.0 || v < threshold {
                continue;
            }
            let is_peak = footprint.iter().all(|&(dx, dy)| {
                if dx == 0 && dy == 0 {
                    return true;
                }
                let n = filtered.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                let earlier = dy < 0 || (dy == 0 && dx < 0);
                if earlier {
                    v > n
                } else {
                    v >= n
                }
            });
            if is_peak {
                peaks.push((x, y));
            }
        }
    }
    Ok(peaks)
}

/// Intensity-weighted centroid inside a circular mask, re-centred on the
/// nearest pixel until the estimate moves less than `convergence_px`.
pub fn refine_centroid(filtered: &FloatImage, peak: (usize, usize), params: &LocateParams) -> Result<Feature> {
    params.validate()?;
    let r = params.radius() as i64;
    let footprint = disk_offsets(params.radius());
    let (w, h) = (filtered.width() as i64, filtered.height() as i64);

    let moments = |cx: i64, cy: i64| -> Result<(f64, f64, f64)> {
        if cx - r < 0 || cy - r < 0 || cx + r >= w || cy + r >= h {
            return Err(Error::RefineFailed(format!("mask at ({cx}, {cy}) leaves the image")));
        }
        let (mut m, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for &(dx, dy) in &footprint {
            let v = filtered.get((cx + dx) as usize, (cy + dy) as usize);
            m += v;
            sx += v * (cx + dx) as f64;
            sy += v * (cy + dy) as f64;
        }
        if !(m > 0.0) {
            return Err(Error::RefineFailed(format!("zero mass at ({cx}, {cy})")));
        }
        Ok((m, sx / m, sy / m))
    };

    let (mut ex, mut ey) = (peak.0 as f64, peak.1 as f64);
    for _ in 0..params.max_refine_iters.max(1) {
        let (_, nx, ny) = moments(ex.round() as i64, ey.round() as i64)?;
        let shift = (nx - ex).hypot(ny - ey);
        ex = nx;
        ey = ny;
        if shift < params.convergence_px {
            break;
        }
    }

    let (cx, cy) = (ex.round() as i64, ey.round() as i64);
    // the last move may have crossed a pixel boundary
    let (m, _, _) = moments(cx, cy)?;
    let gyration: f64 = footprint
        .iter()
        .map(|&(dx, dy)| {
            let (px, py) = (cx + dx, cy + dy);
            let v = filtered.get(px as usize, py as usize);
            v * ((px as f64 - ex).powi(2) + (py as f64 - ey).powi(2))
        })
        .sum();
    Ok(Feature { x: ex, y: ey, mass: m, size: (gyration / m).sqrt() })
}

/// Locate, filter and refine every feature in a frame.
pub fn locate(img: &GrayImage, params: &LocateParams) -> Result<Vec<Feature>> {
    params.validate()?;
    let normalized = params.polarity.normalize_image(img).to_float();
    let filtered = bandpass(&normalized, params)?;
    let mut features = Vec::new();
    for peak in find_candidates(&filtered, params)? {
        match refine_centroid(&filtered, peak, params) {
            Ok(f) => features.push(f),
            Err(Error::RefineFailed(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(features)
}
