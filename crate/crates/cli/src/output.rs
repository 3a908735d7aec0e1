//! Bit-stable artifacts: JSON with sorted keys where every number carries a
//! provenance tag, CSV with 17 significant digits, and a MANIFEST of hashes.

use std::fs;
use std::path::{Path, PathBuf};

use curvlab::Result;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Computed by a solver or a measurement on the mesh.
    Measured,
    /// Closed form, exact arithmetic, or a configured input.
    Exact,
    /// A measured value replaced by a configured one.
    Overridden,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Exact => "exact",
            Provenance::Overridden => "overridden",
        }
    }
}

pub fn tagged(value: impl Into<Value>, p: Provenance) -> Value {
    json!({ "value": value.into(), "provenance": p.as_str() })
}

pub fn measured(x: impl Into<Value>) -> Value {
    tagged(x, Provenance::Measured)
}

pub fn exact(x: impl Into<Value>) -> Value {
    tagged(x, Provenance::Exact)
}

/// Tags every number in a serialized value (recursively) with `p`, leaving
/// already-tagged objects alone.
pub fn tag_all(v: Value, p: Provenance) -> Value {
    match v {
        Value::Number(_) => tagged(v, p),
        Value::Array(a) => Value::Array(a.into_iter().map(|x| tag_all(x, p)).collect()),
        Value::Object(m) if m.contains_key("provenance") && m.len() == 2 => Value::Object(m),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, x)| (k, tag_all(x, p))).collect()),
        other => other,
    }
}

pub fn tagged_struct<T: Serialize>(x: &T, p: Provenance) -> Result<Value> {
    Ok(tag_all(serde_json::to_value(x)?, p))
}

/// JSON object builder; keys come out sorted.
#[derive(Debug, Default, Clone)]
pub struct Report(Map<String, Value>);

impl Report {
    pub fn new() -> Self {
        Report(Map::new())
    }

    pub fn set(&mut self, key: &str, v: Value) -> &mut Self {
        self.0.insert(key.to_string(), v);
        self
    }

    pub fn m(&mut self, key: &str, x: impl Into<Value>) -> &mut Self {
        self.set(key, measured(x))
    }

    pub fn x(&mut self, key: &str, x: impl Into<Value>) -> &mut Self {
        self.set(key, exact(x))
    }

    /// Measured unless `overridden`.
    pub fn mo(&mut self, key: &str, x: f64, overridden: bool) -> &mut Self {
        let p = if overridden { Provenance::Overridden } else { Provenance::Measured };
        self.set(key, tagged(x, p))
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.0)
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV from named columns of equal length.
pub fn csv_columns(columns: &[(&str, &[f64])]) -> String {
    let mut out = columns.iter().map(|c| c.0).collect::<Vec<_>>().join(",");
    out.push('\n');
    let n = columns.first().map_or(0, |c| c.1.len());
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| fmt_num(c.1[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Files produced by a command, in emission order.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub operations: Vec<&'static str>,
}

impl Artifacts {
    pub fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn op(&mut self, name: &'static str) {
        if !self.operations.contains(&name) {
            self.operations.push(name);
        }
    }

    fn manifest(&self, config_bytes: &[u8]) -> String {
        let mut lines = vec!["# file sha256 bytes".to_string()];
        let mut entries: Vec<(&str, &[u8])> = vec![("config.json", config_bytes)];
        entries.extend(self.files.iter().map(|(n, b)| (n.as_str(), b.as_slice())));
        entries.sort_by(|a, b| a.0.cmp(b.0));
        for (name, bytes) in entries {
            let digest = Sha256::digest(bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            lines.push(format!("{name} {hex} {}", bytes.len()));
        }
        lines.push("# operations".into());
        lines.extend(self.operations.iter().map(|s| s.to_string()));
        lines.join("\n") + "\n"
    }

    /// Writes every artifact, the config and the MANIFEST; returns the paths written.
    pub fn write(&self, dir: &Path, config_json: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
            let p = dir.join(name);
            fs::write(&p, bytes)?;
            written.push(p);
            Ok(())
        };
        put("config.json", config_json.as_bytes())?;
        for (name, bytes) in &self.files {
            put(name, bytes)?;
        }
        put("MANIFEST", self.manifest(config_json.as_bytes()).as_bytes())?;
        Ok(written)
    }
}
