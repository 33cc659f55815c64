//! CSV tables and run manifests.
//!
//! Every table starts with `#` comment lines carrying the tool version and the SHA-256 of the
//! run manifest. Floats use Rust's shortest round-trip formatting, so identical runs give
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Command-line arguments after the subcommand, in order.
    pub arguments: Vec<String>,
    /// SHA-256 of every input file, keyed by its role (`spec`, `map`, ...).
    pub spec_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub resolution: Option<f64>,
    pub level: Option<u32>,
    pub bins: Option<usize>,
    /// Further settings: windows, backends, grid statistics.
    pub details: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str, arguments: Vec<String>) -> Self {
        RunManifest {
            tool: "apollon".to_string(),
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            arguments,
            spec_hashes: BTreeMap::new(),
            seed: None,
            count: None,
            resolution: None,
            level: None,
            bins: None,
            details: BTreeMap::new(),
        }
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("manifest details serialize");
        self.details.insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Formats a float for CSV output.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

/// Formats a point as space-separated coordinates.
pub fn point(p: &[f64]) -> String {
    p.iter().map(|c| num(*c)).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key: value` lines after the version and hash lines.
    pub notes: Vec<String>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn render(&self, manifest: &RunManifest) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# apollon {}", manifest.tool_version);
        let _ = writeln!(out, "# manifest-sha256: {}", manifest.hash());
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        out.push_str(&self.columns.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn render_is_deterministic_and_escaped() {
        let mut m = RunManifest::new("metric", vec!["--metric".into(), "j".into()]);
        m.seed = Some(7);
        m.detail("window", [0.0, 1.0]);
        let mut t = CsvTable::new(&["metric", "value"]);
        t.push(vec!["j".into(), num(1.0)]);
        t.push(vec!["a,b".into(), num(0.1 + 0.2)]);
        let a = t.render(&m);
        assert_eq!(a, t.render(&m.clone()));
        assert!(a.starts_with(&format!("# apollon {TOOL_VERSION}\n# manifest-sha256: {}\n", m.hash())));
        assert!(a.ends_with("metric,value\nj,1\n\"a,b\",0.30000000000000004\n"));
        let back: RunManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn special_floats() {
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(point(&[1.5, -2.0]), "1.5 -2");
    }
}
