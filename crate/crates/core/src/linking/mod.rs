//! Frame-to-frame linking of defect observations into trajectories.
//!
//! Each transition is split into independent subnetworks of particles that
//! could plausibly be linked (within the search range). Every subnetwork is
//! solved exactly: the assignment minimizing the summed squared displacement,
//! where each particle left unlinked (a previous position with no successor
//! or a new observation with no predecessor) costs `search_range^2`.
//! Tracks left unlinked stay eligible for `memory_frames` more frames.

mod drift;

pub use drift::{apply_drift_correction, estimate_drift, DriftTable};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// How an observation's size was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    /// Major axis of the ellipse fitted to the segmented region.
    Fitted,
    /// Segmentation or fitting failed; the longer box side was used.
    Fallback,
}

impl FitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Fitted => "fitted",
            FitStatus::Fallback => "fallback",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fitted" => Some(FitStatus::Fitted),
            "fallback" => Some(FitStatus::Fallback),
            _ => None,
        }
    }
}

/// One defect seen in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectObservation {
    pub frame: u32,
    pub center_x: f64,
    pub center_y: f64,
    pub bbox: BoundingBox,
    pub size_nm: Option<f64>,
    pub confidence: Option<f64>,
    pub fit: Option<FitStatus>,
}

impl DefectObservation {
    /// Observation centred on its box.
    pub fn new(frame: u32, bbox: BoundingBox) -> Self {
        let (center_x, center_y) = bbox.center();
        Self { frame, center_x, center_y, bbox, size_nm: None, confidence: None, fit: None }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            center_x: self.center_x + dx,
            center_y: self.center_y + dy,
            bbox: self.bbox.translated(dx, dy),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: u64,
    /// Strictly increasing in frame.
    pub observations: Vec<DefectObservation>,
}

impl Trajectory {
    pub fn first_frame(&self) -> u32 {
        self.observations.first().map_or(0, |o| o.frame)
    }

    pub fn last_frame(&self) -> u32 {
        self.observations.last().map_or(0, |o| o.frame)
    }

    /// Frames spanned, first to last inclusive.
    pub fn lifetime_frames(&self) -> u32 {
        if self.observations.is_empty() {
            0
        } else {
            self.last_frame() - self.first_frame() + 1
        }
    }

    /// Frames inside the span with no observation (bridged by memory).
    pub fn gaps(&self) -> Vec<u32> {
        self.observations.windows(2).flat_map(|w| w[0].frame + 1..w[1].frame).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    pub search_range_px: f64,
    pub memory_frames: u32,
    /// Largest subnetwork (previous plus current particles) solved exactly.
    pub max_subnetwork: usize,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self { search_range_px: 10.0, memory_frames: 3, max_subnetwork: 12 }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.search_range_px > 0.0 && self.search_range_px.is_finite()) {
            return Err(Error::Argument(format!("search range must be > 0, got {}", self.search_range_px)));
        }
        if self.max_subnetwork < 2 {
            return Err(Error::Argument("max_subnetwork must be at least 2".into()));
        }
        Ok(())
    }
}

/// What happened at one frame transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionReport {
    pub frame: u32,
    /// Eligible tracks `(id, x, y)` in id order.
    pub sources: Vec<(u64, f64, f64)>,
    /// Current observations `(x, y)` in linking order.
    pub destinations: Vec<(f64, f64)>,
    /// Destination index chosen for each source.
    pub assignment: Vec<Option<usize>>,
    pub cost: f64,
}

#[derive(Debug, Clone)]
struct ActiveTrack {
    id: u64,
    x: f64,
    y: f64,
    last_frame: u32,
}

/// Incremental linker; feed frames in increasing order.
#[derive(Debug, Clone)]
pub struct Linker {
    params: LinkParams,
    active: Vec<ActiveTrack>,
    trajectories: Vec<Trajectory>,
    last_frame: Option<u32>,
}

impl Linker {
    pub fn new(params: LinkParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, active: Vec::new(), trajectories: Vec::new(), last_frame: None })
    }

    pub fn step(&mut self, frame: u32, mut observations: Vec<DefectObservation>) -> Result<TransitionReport> {
        if let Some(prev) = self.last_frame {
            if frame <= prev {
                return Err(Error::Argument(format!("frame {frame} follows frame {prev}")));
            }
        }
        self.last_frame = Some(frame);
        observations.sort_by(|a, b| a.center_x.total_cmp(&b.center_x).then(a.center_y.total_cmp(&b.center_y)));

        let reach = self.params.memory_frames + 1;
        self.active.retain(|t| frame - t.last_frame <= reach);

        let r2 = self.params.search_range_px.powi(2);
        let candidates: Vec<Vec<(usize, f64)>> = self
            .active
            .iter()
            .map(|t| {
                observations
                    .iter()
                    .enumerate()
                    .filter_map(|(j, o)| {
                        let d2 = (o.center_x - t.x).powi(2) + (o.center_y - t.y).powi(2);
                        (d2 <= r2).then_some((j, d2))
                    })
                    .collect()
            })
            .collect();

        let assignment = solve_transition(&candidates, observations.len(), r2, frame, self.params.max_subnetwork)?;
        let cost = assignment_cost(&candidates, &assignment, observations.len(), r2);

        let report = TransitionReport {
            frame,
            sources: self.active.iter().map(|t| (t.id, t.x, t.y)).collect(),
            destinations: observations.iter().map(|o| (o.center_x, o.center_y)).collect(),
            assignment: assignment.clone(),
            cost,
        };

        let mut claimed = vec![false; observations.len()];
        for (track, choice) in self.active.iter_mut().zip(&assignment) {
            if let Some(j) = *choice {
                claimed[j] = true;
                let obs = &observations[j];
                track.x = obs.center_x;
                track.y = obs.center_y;
                track.last_frame = frame;
                self.trajectories[track.id as usize].observations.push(obs.clone());
            }
        }
        for (j, obs) in observations.into_iter().enumerate() {
            if claimed[j] {
                continue;
            }
            let id = self.trajectories.len() as u64;
            self.active.push(ActiveTrack { id, x: obs.center_x, y: obs.center_y, last_frame: frame });
            self.trajectories.push(Trajectory { id, observations: vec![obs] });
        }
        Ok(report)
    }

    pub fn finish(self) -> Vec<Trajectory> {
        self.trajectories
    }
}

/// Links all frames; returns trajectories in id order.
pub fn link(frames: &BTreeMap<u32, Vec<DefectObservation>>, params: &LinkParams) -> Result<Vec<Trajectory>> {
    link_with_reports(frames, params).map(|(t, _)| t)
}

pub fn link_with_reports(
    frames: &BTreeMap<u32, Vec<DefectObservation>>,
    params: &LinkParams,
) -> Result<(Vec<Trajectory>, Vec<TransitionReport>)> {
    let mut linker = Linker::new(params.clone())?;
    let mut reports = Vec::with_capacity(frames.len());
    for (&frame, obs) in frames {
        reports.push(linker.step(frame, obs.clone())?);
    }
    Ok((linker.finish(), reports))
}

/// Total cost: squared displacement per link plus `r2` per unlinked source
/// and per unclaimed destination.
pub fn assignment_cost(candidates: &[Vec<(usize, f64)>], assignment: &[Option<usize>], n_dest: usize, r2: f64) -> f64 {
    let mut cost = 0.0;
    let mut linked = 0;
    for (cands, choice) in candidates.iter().zip(assignment) {
        match choice {
            Some(j) => {
                linked += 1;
                cost += cands.iter().find(|c| c.0 == *j).map(|c| c.1).expect("chosen link is a candidate");
            }
            None => cost += r2,
        }
    }
    cost + (n_dest - linked) as f64 * r2
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Optimal assignment for one transition, solved per subnetwork.
fn solve_transition(
    candidates: &[Vec<(usize, f64)>],
    n_dest: usize,
    r2: f64,
    frame: u32,
    limit: usize,
) -> Result<Vec<Option<usize>>> {
    let n_src = candidates.len();
    // nodes: sources 0..n_src, destinations n_src..
    let mut parent: Vec<usize> = (0..n_src + n_dest).collect();
    for (s, cands) in candidates.iter().enumerate() {
        for &(d, _) in cands {
            let (a, b) = (find(&mut parent, s), find(&mut parent, n_src + d));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for s in 0..n_src {
        if !candidates[s].is_empty() {
            let root = find(&mut parent, s);
            groups.entry(root).or_default().0.push(s);
        }
    }
    for d in 0..n_dest {
        let root = find(&mut parent, n_src + d);
        if let Some(g) = groups.get_mut(&root) {
            g.1.push(d);
        }
    }

    let mut assignment = vec![None; n_src];
    for (sources, dests) in groups.values() {
        let size = sources.len() + dests.len();
        if size > limit {
            return Err(Error::OversizedSubnetwork { frame, size, limit });
        }
        let local: Vec<Vec<(usize, f64)>> = sources
            .iter()
            .map(|&s| {
                candidates[s].iter().map(|&(d, c)| (dests.binary_search(&d).expect("dest in group"), c)).collect()
            })
            .collect();
        let best = SubnetSolver::solve(&local, dests.len(), r2);
        for (k, &s) in sources.iter().enumerate() {
            assignment[s] = best[k].map(|local_d| dests[local_d]);
        }
    }
    Ok(assignment)
}

/// Exhaustive depth-first search with cost pruning. Options per source are
/// tried in increasing destination index with "unlinked" last, and only a
/// strictly cheaper complete assignment replaces the incumbent, so ties go to
/// the lexicographically first assignment.
struct SubnetSolver<'a> {
    candidates: &'a [Vec<(usize, f64)>],
    n_dest: usize,
    r2: f64,
    used: Vec<bool>,
    current: Vec<Option<usize>>,
    best: Vec<Option<usize>>,
    best_cost: f64,
}

impl<'a> SubnetSolver<'a> {
    fn solve(candidates: &'a [Vec<(usize, f64)>], n_dest: usize, r2: f64) -> Vec<Option<usize>> {
        let mut solver = SubnetSolver {
            candidates,
            n_dest,
            r2,
            used: vec![false; n_dest],
            current: vec![None; candidates.len()],
            best: vec![None; candidates.len()],
            best_cost: f64::INFINITY,
        };
        solver.search(0, 0.0, 0);
        solver.best
    }

    fn search(&mut self, k: usize, partial: f64, linked: usize) {
        if partial > self.best_cost {
            return;
        }
        if k == self.candidates.len() {
            let total = partial + (self.n_dest - linked) as f64 * self.r2;
            if total < self.best_cost {
                self.best_cost = total;
                self.best.clone_from(&self.current);
            }
            return;
        }
        for idx in 0..self.candidates[k].len() {
            let (d, c) = self.candidates[k][idx];
            if self.used[d] {
                continue;
            }
            self.used[d] = true;
            self.current[k] = Some(d);
            self.search(k + 1, partial + c, linked + 1);
            self.used[d] = false;
        }
        self.current[k] = None;
        self.search(k + 1, partial + self.r2, linked);
    }
}
