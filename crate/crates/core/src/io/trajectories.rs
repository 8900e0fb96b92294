use std::collections::BTreeMap;
use std::path::Path;

use super::{csv_line, format_float, read_text, write_text, Header};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::linking::{DefectObservation, FitStatus, Trajectory};

pub const TRAJECTORY_SCHEMA: &str = "defectrack-trajectories/1";

const COLUMNS: [&str; 11] = [
    "trajectory_id",
    "frame",
    "center_x",
    "center_y",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
    "confidence",
    "size_nm",
    "fit_status",
];

/// One row per observation, trajectories in id order. The header's schema
/// entry is set here; other entries are written as given.
pub fn write_trajectories(path: impl AsRef<Path>, header: &Header, trajectories: &[Trajectory]) -> Result<()> {
    let mut header = header.clone();
    header.entries.retain(|(k, _)| k != "schema");
    header.entries.insert(0, ("schema".into(), TRAJECTORY_SCHEMA.into()));
    let mut out = String::new();
    header.write_to(&mut out);
    out.push_str(&csv_line(&COLUMNS.map(String::from)));

    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| t.id);
    for t in sorted {
        for o in &t.observations {
            let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
            out.push_str(&csv_line(&[
                t.id.to_string(),
                o.frame.to_string(),
                format_float(o.center_x),
                format_float(o.center_y),
                format_float(o.bbox.x_min),
                format_float(o.bbox.y_min),
                format_float(o.bbox.x_max),
                format_float(o.bbox.y_max),
                opt(o.confidence),
                opt(o.size_nm),
                o.fit.map(|f| f.as_str().to_string()).unwrap_or_default(),
            ]));
        }
    }
    write_text(path.as_ref(), &out)
}

/// Reads a trajectory file. Unlike detection files, any malformed row is
/// fatal, since a partial trajectory set would silently bias statistics.
pub fn read_trajectories(path: impl AsRef<Path>) -> Result<(Header, Vec<Trajectory>)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (header, body, header_lines) = Header::split(&text);
    if header.schema() != Some(TRAJECTORY_SCHEMA) {
        return Err(Error::UnknownSchema { path: path.into(), found: header.schema().map(str::to_string) });
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let columns: Vec<String> =
        reader.headers().map_err(|e| Error::parse(path, e.to_string()))?.iter().map(str::to_string).collect();
    let mut map: BTreeMap<u64, Vec<DefectObservation>> = BTreeMap::new();
    if columns.iter().all(String::is_empty) {
        return Ok((header, Vec::new()));
    }
    if columns != COLUMNS {
        return Err(Error::parse(path, format!("unexpected columns {columns:?}")));
    }
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line()) + header_lines as u64;
        let fail = |msg: String| Error::parse(path, format!("line {line}: {msg}"));
        let num = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| fail(format!("{}: not a number: {:?}", COLUMNS[i], &record[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if record[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let id: u64 = record[0].parse().map_err(|_| fail(format!("bad trajectory id {:?}", &record[0])))?;
        let frame: u32 = record[1].parse().map_err(|_| fail(format!("bad frame {:?}", &record[1])))?;
        let bbox = BoundingBox::new(num(4)?, num(5)?, num(6)?, num(7)?).map_err(|e| fail(e.to_string()))?;
        let fit = match &record[10] {
            "" => None,
            s => Some(FitStatus::parse(s).ok_or_else(|| fail(format!("unknown fit_status {s:?}")))?),
        };
        let obs = DefectObservation {
            frame,
            center_x: num(2)?,
            center_y: num(3)?,
            bbox,
            confidence: opt(8)?,
            size_nm: opt(9)?,
            fit,
        };
        let list = map.entry(id).or_default();
        if list.last().is_some_and(|prev| prev.frame >= frame) {
            return Err(fail(format!("trajectory {id} frames not strictly increasing")));
        }
        list.push(obs);
    }
    Ok((header, map.into_iter().map(|(id, observations)| Trajectory { id, observations }).collect()))
}
