//! Result tables and their CSV form.
//!
//! A file starts with `# key: value` metadata lines, then a header row, then
//! one row per sweep point. Numbers carry 12 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Ordered `(key, value)` pairs written as comment lines.
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        ResultTable {
            columns,
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::consistency(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = Vec::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}").expect("write to Vec");
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|v| format_value(*v)))?;
            }
            w.flush().map_err(|e| Error::Csv(e.into()))?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut body_start = 0;
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            body_start += line.len() + 1;
            let rest = rest.trim_start();
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| Error::Config(format!("bad metadata line '{line}'")))?;
            metadata.push((k.to_string(), v.to_string()));
        }
        let body = text.get(body_start..).unwrap_or("");
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut table = ResultTable::new(columns);
        table.metadata = metadata;
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            table.push_row(row)?;
        }
        Ok(table)
    }
}

/// 12 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

/// Writes `table` to `path`, creating parent directories.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let text = table.to_csv_string()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ResultTable::from_csv_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_layout() {
        let mut t = ResultTable::new(vec!["x".into()]);
        t.set_meta("seed", 7);
        t.push_row(vec![1.5]).unwrap();
        let text = t.to_csv_string().unwrap();
        assert_eq!(text, "# seed: 7\nx\n1.50000000000e0\n");
    }

    #[test]
    fn round_trip_keeps_twelve_digits() {
        let mut t = ResultTable::new(vec!["a".into(), "b, with comma".into()]);
        t.set_meta("config_sha256", "abc");
        t.push_row(vec![std::f64::consts::PI, -1.234567890123456e-7]).unwrap();
        t.push_row(vec![0.0, f64::NAN]).unwrap();
        let back = ResultTable::from_csv_str(&t.to_csv_string().unwrap()).unwrap();
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.metadata, t.metadata);
        for (r0, r1) in t.rows.iter().zip(&back.rows) {
            for (a, b) in r0.iter().zip(r1) {
                if a.is_nan() {
                    assert!(b.is_nan());
                } else {
                    assert!((a - b).abs() <= 1e-11 * a.abs());
                }
            }
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut t = ResultTable::new(vec!["a".into(), "b".into()]);
        assert!(t.push_row(vec![1.0]).is_err());
    }

    #[test]
    fn unwritable_path_reports_path() {
        let t = ResultTable::new(vec!["a".into()]);
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_csv(&t, &blocker.join("out.csv")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
