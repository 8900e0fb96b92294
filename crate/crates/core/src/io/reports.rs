use std::path::Path;

use serde_json::{Map, Value};

use super::{csv_line, format_float, read_text, write_text, Header};
use crate::analytics::{DiffusionBin, DiffusionRecord, FrameStats};
use crate::error::{Error, Result};
use crate::geometry::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) if v.is_finite() => {
                let rounded: f64 = format_float(*v).parse().expect("formatted float parses");
                Value::from(rounded)
            }
            Cell::Float(_) | Cell::Empty => Value::Null,
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// A fixed-column record type.
pub trait ReportRow {
    fn columns() -> &'static [&'static str];
    fn cells(&self) -> Vec<Cell>;
}

/// Per-frame or pooled detection metrics at one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    /// `None` for the row pooled over all frames.
    pub frame: Option<u32>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub trajectory_id: u64,
    pub frame: u32,
    pub dpa: f64,
    pub size_nm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftRow {
    pub frame: u32,
    pub dx_px: f64,
    pub dy_px: f64,
}

impl ReportRow for EvaluationRow {
    fn columns() -> &'static [&'static str] {
        &["frame", "cutoff_iou", "tp", "fp", "fn", "precision", "recall", "f1"]
    }

    fn cells(&self) -> Vec<Cell> {
        let m = &self.metrics;
        vec![
            self.frame.map_or(Cell::Text("pooled".into()), |f| Cell::Int(f as i64)),
            Cell::Float(m.cutoff_iou),
            Cell::Int(m.tp as i64),
            Cell::Int(m.fp as i64),
            Cell::Int(m.fn_ as i64),
            Cell::Float(m.precision),
            Cell::Float(m.recall),
            Cell::Float(m.f1),
        ]
    }
}

impl ReportRow for FrameStats {
    fn columns() -> &'static [&'static str] {
        &["frame", "dpa", "raw_count", "corrected_density_cm3", "size_q1_nm", "size_median_nm", "size_q3_nm"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.frame as i64),
            Cell::Float(self.dpa),
            Cell::Int(self.raw_count as i64),
            Cell::Float(self.corrected_density_cm3),
            self.size_q1_nm.into(),
            self.size_median_nm.into(),
            self.size_q3_nm.into(),
        ]
    }
}

impl ReportRow for DiffusionRecord {
    fn columns() -> &'static [&'static str] {
        &["trajectory_id", "d_eff_nm2_per_s", "median_size_nm", "lifetime_frames", "pairs"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.trajectory_id as i64),
            Cell::Float(self.d_eff_nm2_per_s),
            self.median_size_nm.into(),
            Cell::Int(self.lifetime_frames as i64),
            Cell::Int(self.pairs as i64),
        ]
    }
}

impl ReportRow for DiffusionBin {
    fn columns() -> &'static [&'static str] {
        &["lo_nm", "hi_nm", "count", "mean_d_eff_nm2_per_s", "sem_d_eff_nm2_per_s"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.lo_nm),
            Cell::Float(self.hi_nm),
            Cell::Int(self.count as i64),
            self.mean_d_eff.into(),
            self.sem_d_eff.into(),
        ]
    }
}

impl ReportRow for GrowthRow {
    fn columns() -> &'static [&'static str] {
        &["trajectory_id", "frame", "dpa", "size_nm"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.trajectory_id as i64),
            Cell::Int(self.frame as i64),
            Cell::Float(self.dpa),
            Cell::Float(self.size_nm),
        ]
    }
}

impl ReportRow for DriftRow {
    fn columns() -> &'static [&'static str] {
        &["frame", "dx_px", "dy_px"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![Cell::Int(self.frame as i64), Cell::Float(self.dx_px), Cell::Float(self.dy_px)]
    }
}

/// Writes rows as CSV (with a `#` header block) or as a JSON object
/// `{"header": {...}, "rows": [{...}, ...]}`.
pub fn write_report<R: ReportRow>(
    path: impl AsRef<Path>,
    header: &Header,
    rows: &[R],
    format: ReportFormat,
) -> Result<()> {
    let columns = R::columns();
    let text = match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            header.write_to(&mut out);
            out.push_str(&csv_line(&columns.iter().map(|c| c.to_string()).collect::<Vec<_>>()));
            for r in rows {
                out.push_str(&csv_line(&r.cells().iter().map(Cell::csv).collect::<Vec<_>>()));
            }
            out
        }
        ReportFormat::Json => {
            let head: Map<String, Value> =
                header.entries.iter().map(|(k, v)| (k.clone(), Value::from(v.as_str()))).collect();
            let body: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let obj: Map<String, Value> =
                        columns.iter().zip(r.cells()).map(|(c, cell)| (c.to_string(), cell.json())).collect();
                    Value::Object(obj)
                })
                .collect();
            let mut root = Map::new();
            root.insert("header".into(), Value::Object(head));
            root.insert("rows".into(), Value::Array(body));
            let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("report serializes");
            s.push('\n');
            s
        }
    };
    write_text(path.as_ref(), &text)
}

/// A report read back as text cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = read_text(path)?;
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => {
            let (header, body, _) = Header::split(&text);
            let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
            let columns =
                reader.headers().map_err(|e| Error::parse(path, e.to_string()))?.iter().map(str::to_string).collect();
            let rows = reader
                .records()
                .map(|r| {
                    r.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| Error::parse(path, e.to_string()))
                })
                .collect::<Result<_>>()?;
            Ok(Report { header, columns, rows })
        }
        ReportFormat::Json => {
            let root: Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
            let mut header = Header::default();
            if let Some(h) = root.get("header").and_then(Value::as_object) {
                for (k, v) in h {
                    header.entries.push((k.clone(), v.as_str().unwrap_or_default().to_string()));
                }
            }
            let rows_json = root.get("rows").and_then(Value::as_array).cloned().unwrap_or_default();
            let columns: Vec<String> =
                rows_json.first().and_then(Value::as_object).map(|o| o.keys().cloned().collect()).unwrap_or_default();
            let rows = rows_json
                .iter()
                .map(|r| {
                    columns
                        .iter()
                        .map(|c| match r.get(c) {
                            Some(Value::Null) | None => String::new(),
                            Some(Value::String(s)) => s.clone(),
                            Some(v) => v.to_string(),
                        })
                        .collect()
                })
                .collect();
            Ok(Report { header, columns, rows })
        }
    }
}
