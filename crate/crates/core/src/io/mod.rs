//! On-disk formats. Every text file starts with a block of `# key: value`
//! lines naming its schema and echoing the parameters that produced it.

mod detections;
mod frames;
mod reports;
mod trajectories;

pub use detections::{import_plain_boxes, read_detections, write_detections, DetectionFile, Diagnostic, FileKind};
pub use frames::{frame_index_from_name, list_frames, read_gray, write_gray};
pub use reports::{
    read_report, write_report, Cell, DriftRow, EvaluationRow, GrowthRow, Report, ReportFormat, ReportRow,
};
pub use trajectories::{read_trajectories, write_trajectories, TRAJECTORY_SCHEMA};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered `# key: value` metadata block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Header {
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(schema: &str) -> Self {
        Self { entries: vec![("schema".into(), schema.into())] }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.push(key, value);
        self
    }

    /// Adds a JSON-encoded entry.
    pub fn with_json<T: serde::Serialize>(self, key: &str, value: &T) -> Self {
        let text = serde_json::to_string(value).expect("header value serializes");
        self.with(key, text)
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into().replace('\n', " ");
        self.entries.push((key.into(), value));
    }

    /// Replaces an existing entry in place, or appends.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.into(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn schema(&self) -> Option<&str> {
        self.get("schema")
    }

    fn write_to(&self, out: &mut String) {
        for (k, v) in &self.entries {
            out.push_str("# ");
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        }
    }

    /// Splits leading `#` lines off `text`; returns the header, the body and
    /// the number of header lines.
    fn split(text: &str) -> (Header, &str, usize) {
        let mut header = Header::default();
        let mut rest = text;
        let mut lines = 0;
        while let Some(line) = rest.strip_prefix('#') {
            let (line, tail) = match line.find('\n') {
                Some(i) => (&line[..i], &line[i + 1..]),
                None => (line, ""),
            };
            let line = line.trim_end_matches('\r').trim_start();
            if let Some((k, v)) = line.split_once(':') {
                header.entries.push((k.trim().to_string(), v.trim().to_string()));
            }
            rest = tail;
            lines += 1;
        }
        (header, rest, lines)
    }
}

/// `printf("%.9g")`: nine significant digits, trailing zeros removed, and
/// exponent notation outside `1e-4 <= |v| < 1e9`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const DIGITS: i32 = 9;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn printf_g_style() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0, "0.666666667"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (2.12e16, "2.12e+16"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-499.926350245, "-499.92635"),
            (1.75, "1.75"),
            (0.8889, "0.8889"),
        ];
        for (v, s) in cases {
            assert_eq!(format_float(v), s, "{v}");
        }
    }

    #[test]
    fn header_split() {
        let text = "# schema: a/1\n#  key : value: with colon\nx,y\n1,2\n";
        let (h, body, n) = Header::split(text);
        assert_eq!(h.schema(), Some("a/1"));
        assert_eq!(h.get("key"), Some("value: with colon"));
        assert_eq!(body, "x,y\n1,2\n");
        assert_eq!(n, 2);
    }

    proptest! {
        #[test]
        fn nine_digit_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let back: f64 = format_float(v).parse().unwrap();
            let rel = if v == 0.0 { back.abs() } else { ((back - v) / v).abs() };
            prop_assert!(rel <= 5e-9, "{} -> {}", v, back);
            // reformatting is stable
            prop_assert_eq!(format_float(back), format_float(v));
        }
    }
}
