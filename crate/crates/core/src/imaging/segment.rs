//! Per-defect segmentation inside a detection box: Otsu binarization,
//! opening, distance-transform seeds and marker watershed, then an ellipse
//! fit of the selected region.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{
    binarize, crack_contour, dilate, distance_transform, fit_ellipse, morph_open, otsu_threshold, watershed,
    EllipseFit, GrayImage, LabelImage, Mask, Polarity,
};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    /// Context added around the box on every side so Otsu sees background.
    pub pad_px: usize,
    pub polarity: Polarity,
    pub open_iterations: usize,
    /// Dilations of the opened mask; pixels outside are sure background.
    pub background_dilations: usize,
    /// Sure foreground is where the distance transform reaches this fraction
    /// of its maximum.
    pub sure_foreground_fraction: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            pad_px: 4,
            polarity: Polarity::Dark,
            open_iterations: 1,
            background_dilations: 3,
            sure_foreground_fraction: 0.7,
        }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sure_foreground_fraction) {
            return Err(Error::Argument(format!(
                "sure_foreground_fraction {} outside [0, 1]",
                self.sure_foreground_fraction
            )));
        }
        if self.open_iterations == 0 {
            return Err(Error::Argument("open_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Column and row of the crop's top-left pixel in the source frame.
    pub origin: (usize, usize),
    /// Selected watershed region clipped to the thresholded foreground,
    /// crop-sized.
    pub mask: Mask,
    /// Full watershed labelling of the crop.
    pub labels: LabelImage,
}

impl Segmentation {
    pub fn area(&self) -> usize {
        self.mask.pixels().iter().filter(|&&v| v).count()
    }

    /// Ellipse fitted to the region outline, in source-frame pixel coordinates.
    pub fn fit_ellipse(&self) -> Result<EllipseFit> {
        let contour = crack_contour(&self.mask);
        let mut fit = fit_ellipse(&contour)?;
        fit.center_x += self.origin.0 as f64;
        fit.center_y += self.origin.1 as f64;
        Ok(fit)
    }
}

pub fn segment_defect(img: &GrayImage, bbox: &BoundingBox, params: &SegmentParams) -> Result<Segmentation> {
    params.validate()?;
    let pad = params.pad_px as f64;
    let x0 = (bbox.x_min.floor() - pad).max(0.0) as usize;
    let y0 = (bbox.y_min.floor() - pad).max(0.0) as usize;
    let x1 = ((bbox.x_max.ceil() + pad).max(0.0) as usize).min(img.width());
    let y1 = ((bbox.y_max.ceil() + pad).max(0.0) as usize).min(img.height());
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::Argument(format!("box {bbox:?} lies outside the frame")));
    }
    let crop = img.crop(x0, y0, x1 - x0, y1 - y0)?;
    let normalized = params.polarity.normalize_image(&crop);

    let threshold = otsu_threshold(&normalized).map_err(|_| Error::SegmentationFailed("uniform crop".into()))?;
    let opened = morph_open(&binarize(&normalized, threshold), params.open_iterations);
    if !opened.pixels().iter().any(|&v| v) {
        return Err(Error::SegmentationFailed("no foreground after opening".into()));
    }

    let maybe_object = dilate(&opened, params.background_dilations);
    let dist = distance_transform(&opened);
    let peak = dist.pixels().iter().copied().fold(0.0, f64::max);
    let sure_fg = Mask::from_fn(crop.width(), crop.height(), |x, y| {
        opened.get(x, y) && dist.get(x, y) >= params.sure_foreground_fraction * peak
    });

    let (components, count) = label_components(&sure_fg);
    let markers = LabelImage::from_fn(crop.width(), crop.height(), |x, y| {
        let c = components.get(x, y);
        if c > 0 {
            c + 1
        } else if maybe_object.get(x, y) {
            0
        } else {
            1
        }
    });
    if count == 0 {
        return Err(Error::SegmentationFailed("no sure foreground".into()));
    }

    // Defects are bright after normalization; flood their inverse so they are basins.
    let surface = normalized.map(|v| 255 - v);
    let labels = watershed(&surface, &markers)?;

    let (cx, cy) = bbox.center();
    let center = ((cx - x0 as f64).floor().max(0.0), (cy - y0 as f64).floor().max(0.0));
    let label =
        pick_label(&labels, center).ok_or_else(|| Error::SegmentationFailed("no defect region in crop".into()))?;
    // The flood splits touching defects; the threshold bounds each one's extent.
    let mask = Mask::from_fn(crop.width(), crop.height(), |x, y| labels.get(x, y) == label && opened.get(x, y));
    if !mask.pixels().iter().any(|&v| v) {
        return Err(Error::SegmentationFailed("selected region is empty".into()));
    }
    Ok(Segmentation { origin: (x0, y0), mask, labels })
}

/// Label under the crop centre, else the defect label nearest to it.
fn pick_label(labels: &LabelImage, center: (f64, f64)) -> Option<i32> {
    let (cx, cy) = ((center.0 as usize).min(labels.width() - 1), (center.1 as usize).min(labels.height() - 1));
    let at = labels.get(cx, cy);
    if at > 1 {
        return Some(at);
    }
    let mut best: Option<(usize, i32)> = None;
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            let l = labels.get(x, y);
            if l > 1 {
                let d = x.abs_diff(cx).pow(2) + y.abs_diff(cy).pow(2);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, l));
                }
            }
        }
    }
    best.map(|(_, l)| l)
}

/// 8-connected components numbered from 1 in raster order.
fn label_components(mask: &Mask) -> (LabelImage, i32) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = LabelImage::filled(w, h, 0);
    let mut next = 0;
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels.get(x, y) != 0 {
                continue;
            }
            next += 1;
            labels.set(x, y, next);
            queue.push_back((x, y));
            while let Some((px, py)) = queue.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (px as i64 + dx, py as i64 + dy);
                        if mask.get_checked(nx, ny) == Some(true) && labels.get(nx as usize, ny as usize) == 0 {
                            labels.set(nx as usize, ny as usize, next);
                            queue.push_back((nx as usize, ny as usize));
                        }
                    }
                }
            }
        }
    }
    (labels, next)
}
