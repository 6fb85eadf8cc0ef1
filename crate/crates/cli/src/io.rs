//! CSV input, report rendering and error classification.

use std::fmt;
use std::path::Path;

use mindiv::simlab::fmt_sig;
use serde_json::{Map, Number, Value};

/// Failure categories, mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input.
    Usage(String),
    /// Overflow, degeneracy, divergence or non-convergence.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<mindiv::Error> for CliError {
    fn from(e: mindiv::Error) -> Self {
        use mindiv::Error as E;
        match e {
            E::SupportMismatch(_) | E::InvalidPmf(_) | E::InvalidParam(_) | E::InvalidData(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Numeric table read from a CSV file with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a numeric CSV; errors name the offending row and column.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return usage(format!("{}: missing header row", path.display()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: row {row_no} (line {}): {e}", path.display(), row_no + 1)))?;
        if rec.len() != header.len() {
            return usage(format!(
                "{}: row {row_no} (line {}) has {} fields, header has {}",
                path.display(),
                row_no + 1,
                rec.len(),
                header.len()
            ));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Usage(format!(
                    "{}: row {row_no} (line {}), column {} ({}): cannot parse {field:?} as a number",
                    path.display(),
                    row_no + 1,
                    j + 1,
                    header[j]
                ))
            })?;
            if !v.is_finite() {
                return usage(format!(
                    "{}: row {row_no} (line {}), column {} ({}): value must be finite",
                    path.display(),
                    row_no + 1,
                    j + 1,
                    header[j]
                ));
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return usage(format!("{}: no data rows", path.display()));
    }
    Ok(Table { header, rows })
}

impl Table {
    /// Splits off the leading `y` column.
    pub fn labeled(self, path: &Path) -> CliResult<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.header[0] != "y" {
            return usage(format!("{}: first column must be `y`, found {:?}", path.display(), self.header[0]));
        }
        let y = self.rows.iter().map(|r| r[0]).collect();
        let x = self.rows.into_iter().map(|r| r[1..].to_vec()).collect();
        Ok((y, x))
    }

    /// Integer labels from the leading `y` column.
    pub fn int_labeled(self, path: &Path) -> CliResult<(Vec<i32>, Vec<Vec<f64>>)> {
        let (y, x) = self.labeled(path)?;
        let mut out = Vec::with_capacity(y.len());
        for (i, v) in y.iter().enumerate() {
            if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                return usage(format!("{}: row {}, column 1 (y): label {v} is not an integer", path.display(), i + 1));
            }
            out.push(*v as i32);
        }
        Ok((out, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A table cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_sig(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => round_number(*v),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Missing => Value::Null,
        }
    }
}

/// Command output, rendered as CSV or JSON.
pub enum Report {
    Scalar { name: String, value: f64 },
    Table { header: Vec<String>, rows: Vec<Vec<Cell>> },
    /// Prerendered CSV with a structured JSON twin.
    Csv { csv: String, json: Value },
    Doc(Value),
}

fn round_number(v: f64) -> Value {
    let r: f64 = fmt_sig(v).parse().unwrap_or(v);
    Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
}

/// Rounds every float in a JSON value to 6 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => round_number(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(o) => {
            for (k, x) in o {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::Number(n) => out.push((
            prefix.to_string(),
            n.as_f64().filter(|_| n.is_f64()).map_or(n.to_string(), fmt_sig),
        )),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

impl Report {
    pub fn default_format(&self) -> Format {
        match self {
            Report::Doc(_) => Format::Json,
            _ => Format::Csv,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match (self, format) {
            (Report::Scalar { value, .. }, Format::Csv) => format!("{}\n", fmt_sig(*value)),
            (Report::Scalar { name, value }, Format::Json) => {
                let mut m = Map::new();
                m.insert(name.clone(), round_number(*value));
                json_text(&Value::Object(m))
            }
            (Report::Table { header, rows }, Format::Csv) => {
                let mut s = header.join(",");
                s.push('\n');
                for r in rows {
                    s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                    s.push('\n');
                }
                s
            }
            (Report::Table { header, rows }, Format::Json) => {
                let arr: Vec<Value> = rows
                    .iter()
                    .map(|r| Value::Object(header.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
                    .collect();
                json_text(&Value::Array(arr))
            }
            (Report::Csv { csv, .. }, Format::Csv) => csv.clone(),
            (Report::Csv { json, .. }, Format::Json) => json_text(&round_json(json.clone())),
            (Report::Doc(v), Format::Json) => json_text(&round_json(v.clone())),
            (Report::Doc(v), Format::Csv) => {
                let mut pairs = Vec::new();
                flatten("", &round_json(v.clone()), &mut pairs);
                let mut s = String::from("key,value\n");
                for (k, x) in pairs {
                    s.push_str(&format!("{k},{x}\n"));
                }
                s
            }
        }
    }
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Parses "5..10" (inclusive) or "5,10,20".
pub fn parse_dims(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot parse dimension list {s:?}; use 5..10 or 5,10,20"));
    if let Some((a, b)) = s.split_once("..") {
        let lo: usize = a.trim().parse().map_err(|_| bad())?;
        let hi: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    let v: Vec<usize> = s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err(bad());
    }
    Ok(v)
}

/// Parses "1:1,2:5" into (β, γ) pairs.
pub fn parse_pairs(s: &str) -> CliResult<Vec<(f64, f64)>> {
    s.split(',')
        .map(|t| {
            let (a, b) = t
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("expected beta:gamma, found {t:?}")))?;
            let p = |x: &str| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {x:?} in {t:?}")));
            Ok((p(a)?, p(b)?))
        })
        .collect()
}
