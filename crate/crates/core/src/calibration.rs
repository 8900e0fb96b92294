//! Physical conversion constants: frame index, dose (dpa), wall time and
//! pixel/nanometre scale, plus the sample volume and visibility correction
//! used for number densities.
//!
//! Every constant lives in [`Calibration`]; nothing downstream hard-codes a
//! physical value.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dose accumulated over the 1175-frame video, from 0.8534 to 2.5 dpa.
const DEFAULT_DPA_SPAN: f64 = 1.6466;
const DEFAULT_FRAME_SPAN: f64 = 1175.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub pixels_per_nm: f64,
    pub image_width_px: u32,
    pub image_height_px: u32,
    pub dpa_intercept: f64,
    pub dpa_per_frame: f64,
    pub dose_rate_dpa_per_s: f64,
    pub sample_volume_nm3: f64,
    pub visibility_factor: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            pixels_per_nm: 2.6884,
            image_width_px: 1344,
            image_height_px: 962,
            dpa_intercept: 0.8534,
            // 0.00140 when rounded; the unrounded slope keeps frame 1175 at 2.5 dpa.
            dpa_per_frame: DEFAULT_DPA_SPAN / DEFAULT_FRAME_SPAN,
            dose_rate_dpa_per_s: 8e-4,
            sample_volume_nm3: 416.6 * 264.0 * 75.0,
            visibility_factor: 7.0 / 4.0,
        }
    }
}

impl Calibration {
    /// Loads a JSON calibration; absent fields take their defaults.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cal: Calibration = serde_json::from_str(text).map_err(|e| Error::parse("<calibration>", e.to_string()))?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pixels_per_nm", self.pixels_per_nm),
            ("dose_rate_dpa_per_s", self.dose_rate_dpa_per_s),
            ("sample_volume_nm3", self.sample_volume_nm3),
            ("dpa_per_frame", self.dpa_per_frame),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !self.dpa_intercept.is_finite() {
            return Err(Error::Argument("dpa_intercept must be finite".into()));
        }
        if !(self.visibility_factor.is_finite() && self.visibility_factor >= 1.0) {
            return Err(Error::Argument(format!("visibility_factor must be >= 1, got {}", self.visibility_factor)));
        }
        if self.image_width_px == 0 || self.image_height_px == 0 {
            return Err(Error::Argument("image dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn seconds_per_frame(&self) -> f64 {
        self.dpa_per_frame / self.dose_rate_dpa_per_s
    }

    pub fn frame_to_dpa(&self, frame: u64) -> f64 {
        self.dpa_intercept + frame as f64 * self.dpa_per_frame
    }

    /// Inverse of [`Calibration::frame_to_dpa`], rounded to the nearest frame.
    pub fn dpa_to_frame(&self, dpa: f64) -> Result<u64> {
        let frame = ((dpa - self.dpa_intercept) / self.dpa_per_frame).round();
        if !frame.is_finite() || frame < 0.0 {
            return Err(Error::Domain(format!("dpa {dpa} precedes frame 0")));
        }
        Ok(frame as u64)
    }

    pub fn dpa_to_time_s(&self, dpa: f64) -> Result<f64> {
        if !(dpa >= 0.0) {
            return Err(Error::Domain(format!("dpa must be non-negative, got {dpa}")));
        }
        Ok(dpa / self.dose_rate_dpa_per_s)
    }

    pub fn frame_to_time_s(&self, frame: u64) -> f64 {
        frame as f64 * self.seconds_per_frame()
    }

    pub fn px_to_nm(&self, length_px: f64) -> Result<f64> {
        if !(length_px >= 0.0) {
            return Err(Error::Domain(format!("pixel length must be non-negative, got {length_px}")));
        }
        Ok(length_px / self.pixels_per_nm)
    }

    pub fn nm_to_px(&self, length_nm: f64) -> Result<f64> {
        if !(length_nm >= 0.0) {
            return Err(Error::Domain(format!("length must be non-negative, got {length_nm}")));
        }
        Ok(length_nm * self.pixels_per_nm)
    }

    /// Frame extent in nanometres, `(width, height)`.
    pub fn field_of_view_nm(&self) -> (f64, f64) {
        (self.image_width_px as f64 / self.pixels_per_nm, self.image_height_px as f64 / self.pixels_per_nm)
    }

    pub fn sample_volume_cm3(&self) -> f64 {
        self.sample_volume_nm3 * 1e-21
    }

    /// Short content hash used to tie output files to the calibration that
    /// produced them.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("calibration serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}
