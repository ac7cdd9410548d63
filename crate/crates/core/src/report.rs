//! Experiment reports: a CSV table plus a JSON twin carrying the config echo.
//!
//! The CSV holds only computed values, so identical inputs give identical
//! bytes. Wall-clock data goes to the JSON twin alone.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

/// One CSV cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) if x.is_nan() => f.write_str("nan"),
            Value::Num(x) if x.is_infinite() => f.write_str(if *x > 0.0 { "inf" } else { "-inf" }),
            Value::Num(x) => write!(f, "{x:.12e}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => f.write_str(if *b { "PASS" } else { "FAIL" }),
            Value::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    write!(f, "\"{}\"", s.replace('"', "\"\""))
                } else {
                    f.write_str(s)
                }
            }
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(n: usize) -> Self {
        Value::Int(n as i64)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// A named pass/fail assertion evaluated by an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub assertions: Vec<Assertion>,
    /// Scenario echo for the JSON twin.
    pub config: serde_json::Value,
    /// Informational remarks (JSON only).
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        ExperimentReport {
            experiment: experiment.to_owned(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            assertions: Vec::new(),
            config: serde_json::Value::Null,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn assert(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), pass, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// Column `name` as numbers (`NaN` for non-numeric cells).
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.columns.iter().position(|n| n == name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| match r[c] {
                Value::Num(x) => x,
                Value::Int(n) => n as f64,
                _ => f64::NAN,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let generated = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let doc = serde_json::json!({
            "experiment": self.experiment,
            "passed": self.passed(),
            "assertions": self.assertions,
            "columns": self.columns,
            "rows": self.rows,
            "config": self.config,
            "notes": self.notes,
            "generated_unix": generated,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    /// Write `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        fs::write(dir.join(format!("{stem}.json")), self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_stable_and_quoted() {
        let mut r = ExperimentReport::new("t", &["check", "params", "value", "pass"]);
        r.push(vec!["a".into(), "s=0.1, t=0.2".into(), 0.1.into(), true.into()]);
        r.push(vec!["b".into(), "".into(), f64::INFINITY.into(), false.into()]);
        assert_eq!(
            r.to_csv(),
            "check,params,value,pass\na,\"s=0.1, t=0.2\",1.000000000000e-1,PASS\nb,,inf,FAIL\n"
        );
        assert_eq!(r.column("value")[0], 0.1);
        r.assert("x", false, "");
        assert!(!r.passed());
        assert!(r.to_json().contains("generated_unix"));
    }
}
