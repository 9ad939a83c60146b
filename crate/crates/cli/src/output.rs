//! CSV tables, plot scripts and the run summary.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Formats `v` with 12 significant digits, in plain decimal notation when
/// the exponent lies in `[-5, 12)`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => f.write_str(&fmt_num(*v)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// A table written as `<experiment>/<name>.csv`.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    /// `(column, unit)`; the unit may be empty.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|(c, u)| ((*c).into(), (*u).into())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|(c, _)| c == column)
    }
}

/// Location of a value: file, column name and 1-based data row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Citation {
    pub file: String,
    pub column: String,
    pub row: usize,
}

impl fmt::Display for Citation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.column, self.row)
    }
}

/// Metadata stamped on every CSV.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub spec_name: String,
    pub spec_hash: String,
    pub version: String,
}

/// A directory being filled; becomes visible under its final name only
/// after [`Staging::commit`].
#[derive(Debug)]
pub struct Staging {
    target: PathBuf,
    partial: PathBuf,
    stamp: Stamp,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path, stamp: Stamp) -> Result<Self> {
        let name = target.file_name().and_then(|n| n.to_str()).context("output path has no directory name")?;
        let partial = target.with_file_name(format!(".{name}.partial"));
        if partial.exists() {
            fs::remove_dir_all(&partial).with_context(|| format!("removing stale {}", partial.display()))?;
        }
        fs::create_dir_all(&partial).with_context(|| format!("creating {}", partial.display()))?;
        Ok(Self { target: target.to_path_buf(), partial, stamp, committed: false })
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    /// Writes `table` under `dir/` and returns its relative path.
    pub fn write_table(&self, dir: &str, table: &Table) -> Result<String> {
        let rel = format!("{dir}/{}.csv", table.name);
        let path = self.partial.join(&rel);
        fs::create_dir_all(path.parent().expect("has parent"))?;
        let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "# vprep {}", self.stamp.version)?;
        writeln!(file, "# spec: {}", self.stamp.spec_name)?;
        writeln!(file, "# spec-sha256: {}", self.stamp.spec_hash)?;
        let units: Vec<String> = table
            .columns
            .iter()
            .map(|(c, u)| if u.is_empty() { c.clone() } else { format!("{c} [{u}]") })
            .collect();
        writeln!(file, "# units: {}", units.join(", "))?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
        w.write_record(table.columns.iter().map(|(c, _)| c.as_str()))?;
        for row in &table.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(rel)
    }

    /// Writes a plain text file under the staging directory.
    pub fn write_text(&self, rel: &str, text: &str) -> Result<()> {
        let path = self.partial.join(rel);
        fs::create_dir_all(path.parent().expect("has parent"))?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    /// Replaces the target directory with the staged one.
    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).with_context(|| format!("removing old {}", self.target.display()))?;
        }
        fs::rename(&self.partial, &self.target)
            .with_context(|| format!("moving {} to {}", self.partial.display(), self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.partial);
        }
    }
}

/// A reported number with its source cell.
#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub source: Option<Citation>,
}

/// A tolerance check and its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub entries: Vec<Entry>,
    pub checks: Vec<Check>,
}

impl Summary {
    /// Records `table[column][row]` (row is 0-based here) under `key`.
    pub fn cite(&mut self, key: &str, file: &str, table: &Table, column: &str, row: usize) {
        let col = table.column_index(column).unwrap_or_else(|| panic!("no column {column} in {}", table.name));
        self.entries.push(Entry {
            key: key.into(),
            value: table.rows[row][col].to_string(),
            source: Some(Citation { file: file.into(), column: column.into(), row: row + 1 }),
        });
    }

    pub fn note(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push(Entry { key: key.into(), value: value.to_string(), source: None });
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, detail });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `key: value` lines, sources in brackets, then one line per check.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            match &e.source {
                Some(c) => s.push_str(&format!("{}: {} [{}]\n", e.key, e.value, c)),
                None => s.push_str(&format!("{}: {}\n", e.key, e.value)),
            }
        }
        for c in &self.checks {
            s.push_str(&format!("check.{}: {} ({})\n", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail));
        }
        s.push_str(&format!("checks.all_passed: {}\n", self.all_passed()));
        s
    }
}
