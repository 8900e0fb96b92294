use std::collections::BTreeMap;

use super::Trajectory;
use crate::error::{Error, Result};

/// Cumulative collective displacement of the field of view, per frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftTable {
    pub offsets: BTreeMap<u32, (f64, f64)>,
}

impl DriftTable {
    pub fn get(&self, frame: u32) -> Option<(f64, f64)> {
        self.offsets.get(&frame).copied()
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median frame-to-frame displacement over all trajectories, accumulated from
/// zero at the first observed frame. Only observations in adjacent frames
/// contribute; a transition without any such pair adds nothing.
pub fn estimate_drift(trajectories: &[Trajectory]) -> DriftTable {
    let mut steps: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut first = u32::MAX;
    let mut last = 0;
    for t in trajectories {
        for o in &t.observations {
            first = first.min(o.frame);
            last = last.max(o.frame);
        }
        for w in t.observations.windows(2) {
            if w[1].frame == w[0].frame + 1 {
                let entry = steps.entry(w[1].frame).or_default();
                entry.0.push(w[1].center_x - w[0].center_x);
                entry.1.push(w[1].center_y - w[0].center_y);
            }
        }
    }
    let mut table = DriftTable::default();
    if first > last {
        return table;
    }
    let (mut x, mut y) = (0.0, 0.0);
    table.offsets.insert(first, (x, y));
    for f in first + 1..=last {
        if let Some((dx, dy)) = steps.get_mut(&f) {
            x += median(dx);
            y += median(dy);
        }
        table.offsets.insert(f, (x, y));
    }
    table
}

/// Subtracts the frame's cumulative drift from every observation.
pub fn apply_drift_correction(trajectories: &[Trajectory], drift: &DriftTable) -> Result<Vec<Trajectory>> {
    trajectories
        .iter()
        .map(|t| {
            let observations = t
                .observations
                .iter()
                .map(|o| {
                    let (dx, dy) = drift
                        .get(o.frame)
                        .ok_or_else(|| Error::Argument(format!("no drift estimate for frame {}", o.frame)))?;
                    Ok(o.translated(-dx, -dy))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Trajectory { id: t.id, observations })
        })
        .collect()
}
