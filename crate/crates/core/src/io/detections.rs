use std::collections::BTreeMap;
use std::path::Path;

use super::{csv_line, format_float, read_text, write_text, Header};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::linking::{DefectObservation, FitStatus};

const DETECTION_SCHEMA: &str = "defectrack-detections/1";
const GROUND_TRUTH_SCHEMA: &str = "defectrack-groundtruth/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    /// Detector output; carries a confidence column.
    Detections,
    /// Labelled boxes; no confidence column.
    GroundTruth,
}

impl FileKind {
    fn schema(self) -> &'static str {
        match self {
            FileKind::Detections => DETECTION_SCHEMA,
            FileKind::GroundTruth => GROUND_TRUTH_SCHEMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile {
    pub kind: FileKind,
    pub header: Header,
    pub frames: BTreeMap<u32, Vec<DefectObservation>>,
}

impl DetectionFile {
    pub fn new(kind: FileKind, frames: BTreeMap<u32, Vec<DefectObservation>>) -> Self {
        Self { kind, header: Header::new(kind.schema()), frames }
    }

    pub fn record_count(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }
}

/// A skipped input line.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

const BOX_COLUMNS: [&str; 5] = ["frame", "x_min", "y_min", "x_max", "y_max"];

/// Reads a detection or ground-truth file. Malformed records are skipped and
/// reported; a missing or unrecognized schema is fatal.
pub fn read_detections(path: impl AsRef<Path>) -> Result<(DetectionFile, Vec<Diagnostic>)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (header, body, header_lines) = Header::split(&text);
    let kind = match header.schema() {
        Some(DETECTION_SCHEMA) => FileKind::Detections,
        Some(GROUND_TRUTH_SCHEMA) => FileKind::GroundTruth,
        other => return Err(Error::UnknownSchema { path: path.into(), found: other.map(str::to_string) }),
    };

    let (frames, diagnostics) = parse_body(path, body, header_lines, kind, 0.0)?;
    Ok((DetectionFile { kind, header, frames }, diagnostics))
}

/// Imports a plain box list with a column row but no `#` header block:
/// `frame,x_min,y_min,x_max,y_max`, plus `confidence` for detections. With
/// `pixel_indices`, maxima are inclusive pixel indices and each pixel is a unit
/// square, so one is added to both maxima.
pub fn import_plain_boxes(
    path: impl AsRef<Path>,
    kind: FileKind,
    pixel_indices: bool,
) -> Result<(DetectionFile, Vec<Diagnostic>)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let offset = if pixel_indices { 1.0 } else { 0.0 };
    let (frames, diagnostics) = parse_body(path, &text, 0, kind, offset)?;
    Ok((DetectionFile::new(kind, frames), diagnostics))
}

type Frames = BTreeMap<u32, Vec<DefectObservation>>;

fn parse_body(
    path: &Path,
    body: &str,
    header_lines: usize,
    kind: FileKind,
    max_offset: f64,
) -> Result<(Frames, Vec<Diagnostic>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let columns: Vec<String> =
        reader.headers().map_err(|e| Error::parse(path, e.to_string()))?.iter().map(str::to_string).collect();
    let mut frames = Frames::new();
    let mut diagnostics = Vec::new();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Ok((frames, diagnostics));
    }
    let index = |name: &str| columns.iter().position(|c| c == name);
    let mut box_idx = [0; 5];
    for (slot, name) in box_idx.iter_mut().zip(BOX_COLUMNS) {
        *slot = index(name).ok_or_else(|| Error::parse(path, format!("missing column {name}")))?;
    }
    let conf_idx = index("confidence");
    if kind == FileKind::Detections && conf_idx.is_none() {
        return Err(Error::parse(path, "detection file lacks a confidence column"));
    }
    let size_idx = index("size_nm");
    let fit_idx = index("fit_status");

    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line()) + header_lines as u64;
                diagnostics.push(Diagnostic { line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line()) + header_lines as u64;
        match parse_record(&record, &box_idx, conf_idx, size_idx, fit_idx, max_offset) {
            Ok(obs) => frames.entry(obs.frame).or_default().push(obs),
            Err(message) => diagnostics.push(Diagnostic { line, message }),
        }
    }
    Ok((frames, diagnostics))
}

fn parse_record(
    record: &csv::StringRecord,
    box_idx: &[usize; 5],
    conf_idx: Option<usize>,
    size_idx: Option<usize>,
    fit_idx: Option<usize>,
    max_offset: f64,
) -> std::result::Result<DefectObservation, String> {
    let field = |i: usize| record.get(i).ok_or_else(|| format!("expected at least {} fields", i + 1));
    let number = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = field(i)?;
        let v: f64 = raw.parse().map_err(|_| format!("{name}: not a number: {raw:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name}: not finite"))
        }
    };
    let frame_raw = field(box_idx[0])?;
    let frame: u32 = frame_raw.parse().map_err(|_| format!("frame: not a non-negative integer: {frame_raw:?}"))?;
    let coords: Vec<f64> = box_idx[1..]
        .iter()
        .zip(&BOX_COLUMNS[1..])
        .map(|(&i, name)| number(i, name))
        .collect::<std::result::Result<_, _>>()?;
    let bbox = BoundingBox::new(coords[0], coords[1], coords[2] + max_offset, coords[3] + max_offset)
        .map_err(|e| e.to_string())?;
    let mut obs = DefectObservation::new(frame, bbox);

    let optional = |idx: Option<usize>| idx.and_then(|i| record.get(i)).filter(|s| !s.is_empty());
    if let Some(i) = conf_idx {
        let c = number(i, "confidence")?;
        if !(0.0..=1.0).contains(&c) {
            return Err(format!("confidence {c} outside [0, 1]"));
        }
        obs.confidence = Some(c);
    }
    if let Some(raw) = optional(size_idx) {
        let s: f64 = raw.parse().map_err(|_| format!("size_nm: not a number: {raw:?}"))?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(format!("size_nm must be positive, got {s}"));
        }
        obs.size_nm = Some(s);
    }
    if let Some(raw) = optional(fit_idx) {
        obs.fit = Some(FitStatus::parse(raw).ok_or_else(|| format!("unknown fit_status {raw:?}"))?);
    }
    Ok(obs)
}

/// Writes frames in order, records within a frame in their stored order.
/// Size and fit columns are emitted only when some record carries them.
pub fn write_detections(path: impl AsRef<Path>, file: &DetectionFile) -> Result<()> {
    let observations: Vec<&DefectObservation> = file.frames.values().flatten().collect();
    let with_size = observations.iter().any(|o| o.size_nm.is_some() || o.fit.is_some());

    let mut header = file.header.clone();
    match header.entries.iter_mut().find(|(k, _)| k == "schema") {
        Some(entry) => entry.1 = file.kind.schema().into(),
        None => header.entries.insert(0, ("schema".into(), file.kind.schema().into())),
    }
    let mut out = String::new();
    header.write_to(&mut out);

    let mut columns: Vec<String> = BOX_COLUMNS.iter().map(|s| s.to_string()).collect();
    if file.kind == FileKind::Detections {
        columns.push("confidence".into());
    }
    if with_size {
        columns.push("size_nm".into());
        columns.push("fit_status".into());
    }
    out.push_str(&csv_line(&columns));

    for o in observations {
        let mut row = vec![
            o.frame.to_string(),
            format_float(o.bbox.x_min),
            format_float(o.bbox.y_min),
            format_float(o.bbox.x_max),
            format_float(o.bbox.y_max),
        ];
        if file.kind == FileKind::Detections {
            row.push(format_float(o.confidence.unwrap_or(1.0)));
        }
        if with_size {
            row.push(o.size_nm.map(format_float).unwrap_or_default());
            row.push(o.fit.map(|f| f.as_str().to_string()).unwrap_or_default());
        }
        out.push_str(&csv_line(&row));
    }
    write_text(path.as_ref(), &out)
}
