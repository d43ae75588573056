//! CSV tables and JSON documents.
//!
//! CSV headers carry their unit as a suffix (`_hz`, `_ps`, `_mw`, `_db`,
//! `_s`, `_bit_per_s`); columns without a suffix are dimensionless. Every
//! JSON document has a top-level `schema_version`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{Format, RunConfig};
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// File name of the configuration echo.
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cell formatting shared by every table.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
display_cell!(u32, u64, usize, u8, bool, &str, String);

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map_or_else(String::new, Cell::cell)
    }
}

#[macro_export]
#[doc(hidden)]
macro_rules! row {
    ($($v:expr),* $(,)?) => {
        vec![$($crate::cli::output::Cell::cell(&$v)),*]
    };
}

/// What a command produced: tables for CSV, one document for JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub command: &'static str,
    pub tables: Vec<Table>,
    pub document: Value,
}

impl Output {
    pub fn new(command: &'static str, tables: Vec<Table>, body: Value) -> Self {
        let mut document = json!({ "schema_version": SCHEMA_VERSION, "command": command });
        if let (Some(doc), Value::Object(extra)) = (document.as_object_mut(), body) {
            doc.extend(extra);
        }
        Self {
            command,
            tables,
            document,
        }
    }

    /// Writes into `dir` when given, otherwise to `stdout`. Returns the paths
    /// written.
    pub fn emit(&self, format: Format, dir: Option<&Path>, stdout: &mut dyn Write) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        match (format, dir) {
            (Format::Csv, Some(dir)) => {
                for t in &self.tables {
                    let path = dir.join(format!("{}.csv", t.name));
                    t.write(fs::File::create(&path)?)?;
                    written.push(path);
                }
            }
            (Format::Json, Some(dir)) => {
                let path = dir.join(format!("{}.json", self.command));
                fs::write(&path, self.json_text()?)?;
                written.push(path);
            }
            (Format::Csv, None) => {
                for (i, t) in self.tables.iter().enumerate() {
                    if i > 0 {
                        writeln!(stdout)?;
                    }
                    t.write(&mut *stdout)?;
                }
            }
            (Format::Json, None) => stdout.write_all(self.json_text()?.as_bytes())?,
        }
        Ok(written)
    }

    pub fn json_text(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.document)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn write_config_echo(dir: &Path, config: &RunConfig) -> Result<PathBuf> {
    let path = dir.join(CONFIG_ECHO);
    fs::write(&path, config.to_toml()?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_and_json_schema() {
        let mut t = Table::new("t", &["power_mw", "secure", "note"]);
        t.push(row![3.5, true, Some("a,b")]);
        t.push(row![0.1 + 0.2, false, None::<&str>]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "power_mw,secure,note\n3.5,true,\"a,b\"\n0.30000000000000004,false,\n"
        );
        let o = Output::new("x", vec![t], json!({"k": 1}));
        assert_eq!(o.document["schema_version"], SCHEMA_VERSION);
        assert_eq!(o.document["k"], 1);
    }
}
