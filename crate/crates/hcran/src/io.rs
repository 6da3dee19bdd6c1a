//! CSV tables with provenance comments, and JSON documents.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Experiment;
use crate::error::{HarnessError, Result};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// One CSV panel. Cells are already formatted.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File stem, e.g. `validate`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Rows whose cells equal the given `(column, value)` pairs.
    pub fn select<'a>(&'a self, filter: &'a [(&'a str, &'a str)]) -> impl Iterator<Item = &'a Vec<String>> + 'a {
        let idx: Vec<(usize, &str)> = filter
            .iter()
            .map(|(c, v)| (self.column(c).unwrap_or_else(|| panic!("no column {c}")), *v))
            .collect();
        self.rows.iter().filter(move |r| idx.iter().all(|(i, v)| r[*i] == *v))
    }

    /// Numeric cell of `row` in column `name`.
    pub fn num(&self, row: &[String], name: &str) -> f64 {
        let i = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        row[i]
            .parse()
            .unwrap_or_else(|_| panic!("column {name} is not numeric: {}", row[i]))
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// SHA-256 of the experiment's canonical JSON form.
pub fn config_hash(exp: &Experiment) -> Result<String> {
    let bytes = serde_json::to_vec(exp)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `#` comment lines placed above the CSV header.
pub fn header_comments(exp: &Experiment) -> Result<Vec<String>> {
    let seeds: Vec<String> = exp.seeds.iter().map(u64::to_string).collect();
    Ok(vec![
        format!("tool: {TOOL_VERSION}"),
        format!("preset: {}", exp.preset),
        format!("config_sha256: {}", config_hash(exp)?),
        format!("seeds: {}", seeds.join(" ")),
    ])
}

/// Renders a table: comment lines, header, then rows.
pub fn render_csv(table: &Table, comments: &[String]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for c in comments {
        writeln!(buf, "# {c}").expect("writing to a Vec");
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(buf);
    w.write_record(&table.columns)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::io("csv buffer", e.into_error()))
}

/// Reads a table written by [`render_csv`], skipping comment lines.
pub fn parse_csv(name: &str, text: &str) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut t = Table::new(name, &[]);
    t.columns = r.headers()?.iter().map(str::to_string).collect();
    for rec in r.records() {
        t.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(t)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Writes every table as `<dir>/<name>.csv` and returns the paths.
pub fn write_tables(dir: &Path, exp: &Experiment, tables: &[Table]) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let comments = header_comments(exp)?;
    tables
        .iter()
        .map(|t| {
            let path = dir.join(format!("{}.csv", t.name));
            let mut c = comments.clone();
            c.push(format!("panel: {}", t.name));
            fs::write(&path, render_csv(t, &c)?).map_err(|e| HarnessError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentSpec, Preset};

    #[test]
    fn csv_round_trip_and_comments() {
        let exp = ExperimentSpec::preset(Preset::Validate).resolve().unwrap();
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec!["x,y".into(), fmt_f64(0.1)]);
        t.push(vec!["z".into(), fmt_f64(1e-13)]);
        let bytes = render_csv(&t, &header_comments(&exp).unwrap()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("# tool: hcran "));
        assert!(text.contains("# config_sha256: "));
        assert!(text.contains("\"x,y\""));
        let back = parse_csv("demo", &text).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.num(&back.rows[1], "b"), 1e-13);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentSpec::preset(Preset::Validate).resolve().unwrap();
        let mut b = a.clone();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.trials = 10;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn f64_format_round_trips() {
        for x in [0.5, 1.0 / 3.0, 1e-13, 123456.789, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
