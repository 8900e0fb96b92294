use super::{Mask, NEIGHBORS_4};

/// Foreground pixels with at least one 4-neighbour outside the foreground
/// (the raster edge counts as outside).
pub fn boundary_pixels(mask: &Mask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.get(x, y) {
                continue;
            }
            let edge = NEIGHBORS_4.iter().any(|&(dx, dy)| mask.get_checked(x as i64 + dx, y as i64 + dy) != Some(true));
            if edge {
                out.push((x, y));
            }
        }
    }
    out
}

/// Midpoints of the pixel edges separating foreground from background, in
/// pixel-centre coordinates. For a digitized shape these points lie on the
/// region's true outline rather than half a pixel inside it, which keeps
/// fitted ellipse axes unbiased.
pub fn crack_contour(mask: &Mask) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if !mask.get(x, y) {
                continue;
            }
            for &(dx, dy) in &NEIGHBORS_4 {
                if mask.get_checked(x as i64 + dx, y as i64 + dy) != Some(true) {
                    out.push((x as f64 + 0.5 * dx as f64, y as f64 + 0.5 * dy as f64));
                }
            }
        }
    }
    out
}
