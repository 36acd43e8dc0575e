//! Tabular experiment output with CSV and JSON emitters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single table entry. Non-finite floats are stored as [`Cell::Null`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Null,
}

impl Cell {
    pub fn float(x: f64) -> Cell {
        if x.is_finite() {
            Cell::Float(x)
        } else {
            Cell::Null
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Float(x) => Some(x),
            Cell::Int(i) => Some(i as f64),
            _ => None,
        }
    }

    fn write_csv(&self, out: &mut String) {
        match self {
            Cell::Int(i) => write!(out, "{i}").unwrap(),
            Cell::Float(x) => write!(out, "{x:.16e}").unwrap(),
            Cell::Text(s) => out.push_str(&csv_escape(s)),
            Cell::Null => out.push_str("NA"),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::float(x)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(if b { "true" } else { "false" }.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row of arity {} for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; `None` where the cell is not numeric.
    pub fn column_f64(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64()).collect())
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    /// Header row plus data rows. Floats use `{:.16e}` (17 significant digits).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| csv_escape(c)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (j, cell) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                cell.write_csv(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: ResultTable = serde_json::from_str(text)?;
        if let Some(r) = t.rows.iter().find(|r| r.len() != t.columns.len()) {
            return Err(Error::InvalidArgument(format!(
                "row of arity {} for {} columns",
                r.len(),
                t.columns.len()
            )));
        }
        Ok(t)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => Ok(self.to_csv()),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Writes the table. For CSV the metadata goes to a `<path>.meta.json` sidecar so the
    /// CSV itself depends only on the computed rows.
    pub fn emit(&self, format: OutputFormat, path: &Path) -> Result<()> {
        std::fs::write(path, self.render(format)?)?;
        if format == OutputFormat::Csv {
            let meta = serde_json::to_string_pretty(&self.metadata)? + "\n";
            std::fs::write(sidecar_path(path), meta)?;
        }
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(["n", "error"]);
        assert_eq!(t.to_csv(), "n,error\n");
    }

    #[test]
    fn one_third_roundtrips_through_csv() {
        let mut t = ResultTable::new(["x"]);
        t.push_row(vec![Cell::float(1.0 / 3.0)]).unwrap();
        let csv = t.to_csv();
        let cell = csv.lines().nth(1).unwrap();
        assert_eq!(cell, "3.3333333333333331e-1");
        let mantissa = cell.split('e').next().unwrap().replace('.', "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(cell.parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn arity_is_enforced() {
        let mut t = ResultTable::new(["a", "b"]);
        assert!(t.push_row(vec![Cell::Int(1)]).is_err());
        assert!(ResultTable::from_json(r#"{"columns":["a"],"rows":[[1,2]]}"#).is_err());
    }

    #[test]
    fn json_roundtrip_preserves_table() {
        let mut t = ResultTable::new(["n", "err", "note", "order"]);
        t.push_row(vec![Cell::Int(2), Cell::float(0.1), "a,b".into(), Cell::Null])
            .unwrap();
        t.push_row(vec![Cell::Int(4), Cell::float(1.0), "x".into(), Cell::float(1.5)])
            .unwrap();
        t.set_meta("seed", 7u64);
        let back = ResultTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn text_cells_are_escaped() {
        let mut t = ResultTable::new(["s"]);
        t.push_row(vec!["say \"hi\", then".into()]).unwrap();
        assert_eq!(t.to_csv(), "s\n\"say \"\"hi\"\", then\"\n");
    }

    #[test]
    fn emit_writes_sidecar_for_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let mut t = ResultTable::new(["a"]);
        t.set_meta("seed", 3u64);
        t.emit(OutputFormat::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a\n");
        let meta = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(meta.contains("\"seed\": 3"));
    }

    proptest! {
        #[test]
        fn csv_floats_reparse_exactly(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let mut t = ResultTable::new(["x"]);
            t.push_row(vec![Cell::float(x)]).unwrap();
            let csv = t.to_csv();
            let cell = csv.lines().nth(1).unwrap();
            prop_assert_eq!(cell.parse::<f64>().unwrap(), x);
        }

        #[test]
        fn json_float_cells_roundtrip(xs in proptest::collection::vec(-1e300f64..1e300, 0..8)) {
            let mut t = ResultTable::new(["x"]);
            for x in &xs {
                t.push_row(vec![Cell::float(*x)]).unwrap();
            }
            let back = ResultTable::from_json(&t.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
