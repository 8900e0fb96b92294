//! Synthetic corruption for robustness studies. Magnitudes are expressed on
//! the normalized `[0, 1]` intensity scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Additive zero-mean Gaussian with the given variance.
    Gaussian { variance: f64 },
    /// Each pixel is replaced with probability `amount`; a replaced pixel
    /// becomes white with probability `ratio`, otherwise black.
    SaltPepper { amount: f64, ratio: f64 },
    /// Shot noise: intensity `v` becomes `Poisson(v * peak) / peak`.
    /// An infinite `peak` is the noiseless limit.
    Poisson { peak: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian { variance } if !(variance >= 0.0 && variance.is_finite()) => {
                Err(Error::Argument(format!("gaussian variance must be >= 0, got {variance}")))
            }
            NoiseModel::SaltPepper { amount, ratio }
                if !((0.0..=1.0).contains(&amount) && (0.0..=1.0).contains(&ratio)) =>
            {
                Err(Error::Argument(format!(
                    "salt-and-pepper amount and ratio must lie in [0, 1], got {amount}, {ratio}"
                )))
            }
            NoiseModel::Poisson { peak } if !(peak > 0.0) => {
                Err(Error::Argument(format!("poisson peak must be > 0, got {peak}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_identity(&self) -> bool {
        match *self {
            NoiseModel::Gaussian { variance } => variance == 0.0,
            NoiseModel::SaltPepper { amount, .. } => amount == 0.0,
            NoiseModel::Poisson { peak } => peak.is_infinite(),
        }
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn add_noise(img: &GrayImage, model: NoiseModel, seed: u64) -> Result<GrayImage> {
    model.validate()?;
    if model.is_identity() {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    match model {
        NoiseModel::Gaussian { variance } => {
            let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::Argument(e.to_string()))?;
            for p in out.pixels_mut() {
                *p = quantize(f64::from(*p) / 255.0 + normal.sample(&mut rng));
            }
        }
        NoiseModel::SaltPepper { amount, ratio } => {
            for p in out.pixels_mut() {
                if rng.random::<f64>() < amount {
                    *p = if rng.random::<f64>() < ratio { 255 } else { 0 };
                }
            }
        }
        NoiseModel::Poisson { peak } => {
            for p in out.pixels_mut() {
                let lambda = f64::from(*p) / 255.0 * peak;
                let count = if lambda > 0.0 {
                    Poisson::new(lambda).map_err(|e| Error::Argument(e.to_string()))?.sample(&mut rng)
                } else {
                    0.0
                };
                *p = quantize(count / peak);
            }
        }
    }
    Ok(out)
}
