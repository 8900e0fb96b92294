//! Binary morphology with a 3x3 all-ones structuring element. Pixels outside
//! the raster are ignored, so the image border neither erodes nor dilates.

use super::Mask;

fn apply_3x3(mask: &Mask, keep_if_all: bool) -> Mask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    Mask::from_fn(mask.width(), mask.height(), |x, y| {
        let (x, y) = (x as i64, y as i64);
        let mut hits = (-1..=1)
            .flat_map(|dy| (-1..=1).map(move |dx| (x + dx, y + dy)))
            .filter(|&(nx, ny)| nx >= 0 && ny >= 0 && nx < w && ny < h)
            .map(|(nx, ny)| mask.get(nx as usize, ny as usize));
        if keep_if_all {
            hits.all(|v| v)
        } else {
            hits.any(|v| v)
        }
    })
}

pub fn erode(mask: &Mask, iterations: usize) -> Mask {
    (0..iterations).fold(mask.clone(), |m, _| apply_3x3(&m, true))
}

pub fn dilate(mask: &Mask, iterations: usize) -> Mask {
    (0..iterations).fold(mask.clone(), |m, _| apply_3x3(&m, false))
}

/// Erosion `iterations` times followed by dilation `iterations` times.
pub fn morph_open(mask: &Mask, iterations: usize) -> Mask {
    dilate(&erode(mask, iterations), iterations)
}
