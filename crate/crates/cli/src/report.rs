//! Key-value run reports (valid TOML) and comma-separated tables.

use std::fmt::Write as _;

use chg_core::DomainParams;

/// Float with 17 significant digits; `nan`/`inf` spelled the TOML way.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // `+ 0.0` turns −0 into 0
        format!("{:.16e}", v + 0.0)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Matrix(Vec<Vec<f64>>),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => fmt_f64(*v),
            Value::Bool(v) => v.to_string(),
            Value::Str(s) => quote(s),
            Value::Matrix(rows) => {
                let rows: Vec<String> = rows
                    .iter()
                    .map(|r| format!("[{}]", r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(", ")))
                    .collect();
                format!("[{}]", rows.join(", "))
            }
        }
    }
}

/// One named check over a batch of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub points: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: &str, points: usize, max_residual: f64, tolerance: f64) -> Self {
        Self { name: name.into(), points, max_residual, tolerance }
    }

    pub fn pass(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub timestamp: Option<u64>,
    pub config: Vec<(String, Value)>,
    pub tolerances: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub result: Vec<(String, Value)>,
    /// Set when the run failed for a reason other than a check.
    pub failure: Option<String>,
}

impl Report {
    pub fn new(command: &str, timestamp: bool) -> Self {
        let timestamp = timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self { command: command.into(), timestamp, ..Default::default() }
    }

    pub fn config(&mut self, key: &str, value: Value) {
        self.config.push((key.into(), value));
    }

    pub fn domain(&mut self, params: &DomainParams) {
        self.config("p", Value::Int(params.p() as i64));
        self.config("r", Value::Int(params.r() as i64));
        self.config("K", Value::Float(params.k()));
        self.config("special_K", Value::Bool(params.is_special()));
    }

    pub fn result(&mut self, key: &str, value: Value) {
        self.result.push((key.into(), value));
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.checks.iter().all(Check::pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", quote(&self.command));
        let _ = writeln!(out, "status = {}", quote(if self.passed() { "pass" } else { "fail" }));
        if let Some(ts) = self.timestamp {
            let _ = writeln!(out, "timestamp = {ts}");
        }
        if let Some(reason) = &self.failure {
            let _ = writeln!(out, "failure = {}", quote(reason));
        }
        if !self.config.is_empty() {
            out.push_str("\n[config]\n");
            for (k, v) in &self.config {
                let _ = writeln!(out, "{k} = {}", v.render());
            }
        }
        if !self.tolerances.is_empty() {
            out.push_str("\n[tolerances]\n");
            for (k, v) in &self.tolerances {
                let _ = writeln!(out, "{k} = {}", fmt_f64(*v));
            }
        }
        if !self.result.is_empty() {
            out.push_str("\n[result]\n");
            for (k, v) in &self.result {
                let _ = writeln!(out, "{k} = {}", v.render());
            }
        }
        for c in &self.checks {
            out.push_str("\n[[check]]\n");
            let _ = writeln!(out, "name = {}", quote(&c.name));
            let _ = writeln!(out, "points = {}", c.points);
            let _ = writeln!(out, "max_residual = {}", fmt_f64(c.max_residual));
            let _ = writeln!(out, "tolerance = {}", fmt_f64(c.tolerance));
            let _ = writeln!(out, "pass = {}", c.pass());
        }
        out
    }
}

/// Comma-separated table with `#`-prefixed summary lines after the rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), ..Default::default() }
    }

    pub fn summary(&mut self, key: &str, value: impl Into<String>) {
        self.summary.push((key.into(), value.into()));
    }

    pub fn render(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}
