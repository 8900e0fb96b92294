use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{GrayImage, LabelImage, NEIGHBORS_4};
use crate::error::{Error, Result};

/// Label written where two catchment basins meet.
pub const BOUNDARY_LABEL: i32 = -1;

/// Marker-controlled watershed by priority flooding (Meyer).
///
/// `surface` is flooded from low to high values. `markers` holds positive
/// seed labels and `0` for pixels to be assigned. A pixel reached from two
/// different labels becomes [`BOUNDARY_LABEL`]; boundary pixels do not
/// propagate. Pixels that end up unreachable are also boundary.
pub fn watershed(surface: &GrayImage, markers: &LabelImage) -> Result<LabelImage> {
    if surface.width() != markers.width() || surface.height() != markers.height() {
        return Err(Error::Argument("surface and markers differ in size".into()));
    }
    if markers.pixels().iter().any(|&l| l < 0) {
        return Err(Error::Argument("marker labels must be non-negative".into()));
    }
    if !markers.pixels().iter().any(|&l| l > 0) {
        return Err(Error::Argument("watershed needs at least one positive marker".into()));
    }

    let (w, h) = (surface.width() as i64, surface.height() as i64);
    let mut labels = markers.clone();
    let mut queued = vec![false; labels.len()];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;

    let index = |x: i64, y: i64| (y * w + x) as usize;
    let mut enqueue_neighbors =
        |labels: &LabelImage, queued: &mut [bool], heap: &mut BinaryHeap<_>, x: i64, y: i64, level: u8| {
            for (dx, dy) in NEIGHBORS_4 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let i = index(nx, ny);
                if labels.pixels()[i] == 0 && !queued[i] {
                    queued[i] = true;
                    let priority = surface.pixels()[i].max(level);
                    heap.push(Reverse((priority, seq, i)));
                    seq += 1;
                }
            }
        };

    for y in 0..h {
        for x in 0..w {
            if labels.pixels()[index(x, y)] > 0 {
                enqueue_neighbors(&labels, &mut queued, &mut heap, x, y, 0);
            }
        }
    }

    while let Some(Reverse((level, _, i))) = heap.pop() {
        let (x, y) = ((i as i64) % w, (i as i64) / w);
        let mut assigned = 0;
        for (dx, dy) in NEIGHBORS_4 {
            let Some(l) = labels.get_checked(x + dx, y + dy) else { continue };
            if l > 0 {
                if assigned == 0 {
                    assigned = l;
                } else if assigned != l {
                    assigned = BOUNDARY_LABEL;
                    break;
                }
            }
        }
        if assigned == 0 {
            // reached only through boundary pixels
            assigned = BOUNDARY_LABEL;
        }
        labels.pixels_mut()[i] = assigned;
        if assigned > 0 {
            enqueue_neighbors(&labels, &mut queued, &mut heap, x, y, level);
        }
    }

    for l in labels.pixels_mut() {
        if *l == 0 {
            *l = BOUNDARY_LABEL;
        }
    }
    Ok(labels)
}
