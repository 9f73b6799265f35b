//! Output artifacts. Every artifact carries the resolved run configuration as
//! `key = value` text (itself a valid `--config` file) and its SHA-256.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Enumerations and evaluations with no acceptance threshold.
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Fail => 1,
            _ => 0,
        }
    }
}

/// Resolved parameters of one run, in flag spelling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<String, String>,
}

impl RunConfig {
    /// From any serializable argument struct; `None` fields are dropped.
    pub fn from_args<T: Serialize>(command: &str, args: &T) -> Self {
        let mut params = BTreeMap::new();
        if let Ok(Value::Object(map)) = serde_json::to_value(args) {
            for (k, v) in map {
                let text = match v {
                    Value::Null => continue,
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                params.insert(k, text);
            }
        }
        RunConfig { command: command.to_string(), params }
    }

    pub fn seed(&self) -> Option<u64> {
        self.params.get("seed").and_then(|s| s.parse().ok())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.command);
        for (k, v) in &self.params {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Parses `key = value` lines; `#` starts a comment. Keys may carry a leading `--`.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| format!("config line {}: expected `key = value`, got `{raw}`", i + 1))?;
        let k = k.trim_start_matches("--");
        if k.is_empty() || v.is_empty() {
            return Err(format!("config line {}: empty key or value", i + 1));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub check: String,
    pub config: String,
    pub input_hash: String,
    pub seed: Option<u64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub diff: Option<f64>,
    pub tail_budget: Option<f64>,
    pub verdict: Verdict,
    pub summary: String,
    pub result: Value,
    /// Per-row output of scans; streamed one per line in JSON-lines mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Value>>,
}

impl Artifact {
    pub fn new<T: Serialize>(cfg: &RunConfig, verdict: Verdict, summary: String, result: &T) -> Self {
        Artifact {
            check: cfg.command.clone(),
            config: cfg.to_text(),
            input_hash: cfg.hash(),
            seed: cfg.seed(),
            lhs: None,
            rhs: None,
            diff: None,
            tail_budget: None,
            verdict,
            summary,
            result: serde_json::to_value(result).unwrap_or(Value::Null),
            rows: None,
        }
    }

    pub fn sides(mut self, lhs: f64, rhs: f64, diff: f64, tail_budget: f64) -> Self {
        self.lhs = Some(lhs);
        self.rhs = Some(rhs);
        self.diff = Some(diff);
        self.tail_budget = Some(tail_budget);
        self
    }

    pub fn with_rows<T: Serialize>(mut self, rows: &[T]) -> Self {
        self.rows = Some(rows.iter().map(|r| serde_json::to_value(r).unwrap_or(Value::Null)).collect());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Jsonl,
    Csv,
}

fn header(a: &Artifact) -> Value {
    let mut v = serde_json::to_value(a).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.remove("rows");
    }
    v
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Nested objects become dotted columns, arrays stay as JSON text.
fn flatten(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => {
            out.insert(if prefix.is_empty() { "value".into() } else { prefix.to_string() }, other.clone());
        }
    }
}

pub fn write_artifact<W: Write + ?Sized>(out: &mut W, a: &Artifact, format: Format) -> std::io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, a)?;
            writeln!(out)
        }
        Format::Jsonl => {
            serde_json::to_writer(&mut *out, &header(a))?;
            writeln!(out)?;
            for r in a.rows.iter().flatten() {
                serde_json::to_writer(&mut *out, r)?;
                writeln!(out)?;
            }
            Ok(())
        }
        Format::Csv => {
            let rows: Vec<Map<String, Value>> = match &a.rows {
                Some(rows) => rows
                    .iter()
                    .map(|r| {
                        let mut m = Map::new();
                        flatten("", r, &mut m);
                        m
                    })
                    .collect(),
                None => {
                    let mut m = Map::new();
                    flatten("", &header(a), &mut m);
                    vec![m]
                }
            };
            let mut w = csv::Writer::from_writer(out);
            if let Some(first) = rows.first() {
                w.write_record(first.keys())?;
            }
            for r in &rows {
                w.write_record(r.values().map(cell))?;
            }
            w.flush()
        }
    }
}
