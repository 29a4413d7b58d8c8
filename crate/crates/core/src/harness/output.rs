//! Tabular CSV/JSON output. Numbers carry 9 significant digits so that
//! files are byte-stable across platforms for identical inputs.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::suite::ResultMatrix;
use crate::multiscale::HorizonProfile;
use crate::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::param(format!("unknown format `{other}`"))),
        }
    }
}

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest form of `round_sig(x)`: plain decimal for magnitudes in
/// `[1e-6, 1e15)`, scientific otherwise. `-0` prints as `0`.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        return "0".into();
    }
    if !r.is_finite() || (1e-6..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Num(f64),
    Bool(bool),
    Missing,
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Num(x) => fmt_num(*x),
            Value::Bool(b) => b.to_string(),
            Value::Missing => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Value::Str(s) => serde_json::to_string(s).expect("strings serialize"),
            Value::Int(i) => i.to_string(),
            Value::Num(x) if x.is_finite() => fmt_num(*x),
            Value::Bool(b) => b.to_string(),
            Value::Num(_) | Value::Missing => "null".into(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Str(x.to_string())
    }
}

impl From<Option<f64>> for Value {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Value::Missing, Value::Num)
    }
}

/// Header plus rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::csv))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// An array with one object per row, keys in header order.
    pub fn to_json(&self) -> String {
        let mut out = String::from("[");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
            for (j, (k, v)) in self.header.iter().zip(row).enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                out.push_str(": ");
                out.push_str(&v.json());
            }
            out.push('}');
        }
        out.push_str(if self.rows.is_empty() { "]\n" } else { "\n]\n" });
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Data that can be written as a table.
pub trait Emit {
    fn table(&self) -> Table;
}

impl Emit for Table {
    fn table(&self) -> Table {
        self.clone()
    }
}

impl Emit for ResultMatrix {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["agent", "task", "pass_rate", "stderr", "mean_cost", "mean_replay"]);
        for c in &self.cells {
            t.push(vec![
                c.agent.as_str().into(),
                c.task.as_str().into(),
                c.pass_rate.into(),
                c.stderr.into(),
                c.mean_cost.into(),
                c.mean_replay.into(),
            ]);
        }
        t
    }
}

impl Emit for HorizonProfile {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["gamma", "similarity"]);
        for (g, s) in self.gammas.iter().zip(&self.similarity) {
            t.push(vec![(*g).into(), (*s).into()]);
        }
        t
    }
}

/// Writes `data` to `path`, creating parent directories.
pub fn emit_results(data: &dyn Emit, format: Format, path: &Path) -> Result<()> {
    write_text(path, &data.table().render(format))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

/// Header and string rows of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;
    Ok((header, rows))
}
