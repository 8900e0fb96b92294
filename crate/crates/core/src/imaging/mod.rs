//! Grayscale raster operations used to measure individual defects.

mod contour;
mod distance;
mod ellipse;
mod morphology;
mod noise;
mod segment;
mod threshold;
mod watershed;

#[cfg(test)]
pub(crate) use segment::tests_helpers;

pub use contour::{boundary_pixels, crack_contour};
pub use distance::distance_transform;
pub use ellipse::{fit_ellipse, EllipseFit};
pub use morphology::{dilate, erode, morph_open};
pub use noise::{add_noise, NoiseModel};
pub use segment::{segment_defect, SegmentParams, Segmentation};
pub use threshold::{binarize, otsu_threshold};
pub use watershed::{watershed, BOUNDARY_LABEL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2-D raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// 8-bit intensities.
pub type GrayImage = Raster<u8>;
pub type FloatImage = Raster<f64>;
pub type Mask = Raster<bool>;
/// `0` unknown, positive values are region labels, [`BOUNDARY_LABEL`] marks
/// watershed lines.
pub type LabelImage = Raster<i32>;

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument("raster dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::Argument(format!("{} pixels for a {width}x{height} raster", data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[T] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    /// Value at signed coordinates, `None` outside the raster.
    #[inline]
    pub fn get_checked(&self, x: i64, y: i64) -> Option<T> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(self.get(x as usize, y as usize))
        }
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Raster<U> {
        Raster { width: self.width, height: self.height, data: self.data.iter().copied().map(f).collect() }
    }

    /// Copies the `width x height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::Argument(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{} raster",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y)))
    }
}

impl GrayImage {
    pub fn to_float(&self) -> FloatImage {
        self.map(f64::from)
    }
}

/// Which intensity the defects have relative to the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Dark defects on a bright field (bright-field TEM).
    #[default]
    Dark,
    Bright,
}

impl Polarity {
    /// Maps an intensity so that defects become bright.
    #[inline]
    pub fn normalize(self, v: u8) -> u8 {
        match self {
            Polarity::Dark => 255 - v,
            Polarity::Bright => v,
        }
    }

    pub fn normalize_image(self, img: &GrayImage) -> GrayImage {
        img.map(|v| self.normalize(v))
    }
}

/// 4-connected neighbour offsets.
pub(crate) const NEIGHBORS_4: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
