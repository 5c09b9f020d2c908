//! Artifact encoding, the run manifest, and `--check` comparison.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Relative tolerance used by `--check` when bytes differ.
pub const CHECK_REL_TOL: f64 = 1e-9;

/// One output file held in memory until the whole command has succeeded.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
        bytes.push(b'\n');
        Self {
            name: name.to_string(),
            bytes,
        }
    }

    pub fn csv(name: &str, table: Table) -> Self {
        Self {
            name: name.to_string(),
            bytes: table.finish(),
        }
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(&self.bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed 17-significant-digit rendering used for every CSV float.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(header.iter().map(AsRef::as_ref))
            .expect("in-memory write");
        Self { writer }
    }

    pub fn row<I>(&mut self, fields: I)
    where
        I: IntoIterator<Item = String>,
    {
        let fields: Vec<String> = fields.into_iter().collect();
        self.writer.write_record(&fields).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// Rewrites node indices under the keys `actuator`, `sensor` and `node` to the
/// 1-based labels used in scenario files.
pub fn relabel(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                match (k.as_str(), v.as_u64()) {
                    ("actuator" | "sensor" | "node", Some(i)) => *v = json!(i + 1),
                    _ => relabel(v),
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(relabel),
        _ => {}
    }
}

pub fn to_labeled_value<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("report types serialize");
    relabel(&mut v);
    v
}

fn file_entries(artifacts: &[Artifact]) -> Value {
    artifacts
        .iter()
        .map(|a| json!({ "path": a.name, "bytes": a.bytes.len(), "sha256": a.sha256() }))
        .collect()
}

fn read_manifest(dir: &Path) -> Result<Option<Value>, CliError> {
    let path = dir.join(MANIFEST);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::io(&path, e)),
    }
}

/// Writes the artifacts and records them in the directory manifest under
/// `command`, keeping entries left there by other commands.
pub fn write_all(dir: &Path, command: &str, artifacts: Vec<Artifact>) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut runs = read_manifest(dir)?
        .and_then(|m| m.get("runs").and_then(Value::as_object).cloned())
        .unwrap_or_default();
    runs.insert(command.to_string(), json!({ "files": file_entries(&artifacts) }));
    let manifest = Artifact::json(
        MANIFEST,
        &json!({ "tool": "rigidkit", "version": env!("CARGO_PKG_VERSION"), "runs": runs }),
    );
    let mut written = Vec::new();
    for a in artifacts.iter().chain(std::iter::once(&manifest)) {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}

/// Compares freshly computed artifacts with the files the manifest lists for
/// `command`. Returns one line per mismatch.
pub fn check_all(dir: &Path, command: &str, artifacts: &[Artifact]) -> Result<Vec<String>, CliError> {
    let manifest = read_manifest(dir)?
        .ok_or_else(|| CliError::input(format!("{}: no manifest to check against", dir.display())))?;
    let files = manifest["runs"][command]["files"]
        .as_array()
        .ok_or_else(|| CliError::input(format!("manifest has no record of a `{command}` run")))?;

    let mut problems = Vec::new();
    for entry in files {
        let name = entry["path"].as_str().unwrap_or_default();
        let Some(fresh) = artifacts.iter().find(|a| a.name == name) else {
            problems.push(format!("{name}: not produced by this run"));
            continue;
        };
        let on_disk = match fs::read(dir.join(name)) {
            Ok(b) => b,
            Err(e) => {
                problems.push(format!("{name}: {e}"));
                continue;
            }
        };
        let disk_hash = hex(&Sha256::digest(&on_disk));
        if entry["sha256"].as_str() != Some(disk_hash.as_str()) {
            problems.push(format!("{name}: modified since the manifest was written"));
        }
        if on_disk == fresh.bytes {
            continue;
        }
        let same = if name.ends_with(".json") {
            json_close(&on_disk, &fresh.bytes)
        } else {
            csv_close(&on_disk, &fresh.bytes)
        };
        if !same {
            problems.push(format!(
                "{name}: differs beyond relative tolerance {CHECK_REL_TOL:e}"
            ));
        }
    }
    for a in artifacts {
        if !files.iter().any(|e| e["path"].as_str() == Some(a.name.as_str())) {
            problems.push(format!("{}: missing from manifest", a.name));
        }
    }
    Ok(problems)
}

fn numbers_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= CHECK_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

fn values_close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => numbers_close(x, y),
            _ => x == y,
        },
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_close(p, q))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter()
                    .all(|(k, v)| y.get(k).is_some_and(|w| values_close(v, w)))
        }
        _ => a == b,
    }
}

fn json_close(a: &[u8], b: &[u8]) -> bool {
    match (
        serde_json::from_slice::<Value>(a),
        serde_json::from_slice::<Value>(b),
    ) {
        (Ok(x), Ok(y)) => values_close(&x, &y),
        _ => false,
    }
}

fn csv_close(a: &[u8], b: &[u8]) -> bool {
    let records = |bytes: &[u8]| -> Option<Vec<csv::StringRecord>> {
        csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(bytes)
            .records()
            .collect::<Result<_, _>>()
            .ok()
    };
    let (Some(x), Some(y)) = (records(a), records(b)) else {
        return false;
    };
    x.len() == y.len()
        && x.iter().zip(&y).all(|(r, s)| {
            r.len() == s.len()
                && r.iter()
                    .zip(s.iter())
                    .all(|(p, q)| match (p.parse::<f64>(), q.parse::<f64>()) {
                        (Ok(p), Ok(q)) => numbers_close(p, q),
                        _ => p == q,
                    })
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let x = 0.1 + 0.2;
        let s = float(x);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn relabel_shifts_node_keys_only() {
        let mut v = json!({"actuator": 0, "nested": [{"node": 2, "n": 4}], "sensor": 1});
        relabel(&mut v);
        assert_eq!(
            v,
            json!({"actuator": 1, "nested": [{"node": 3, "n": 4}], "sensor": 2})
        );
    }

    #[test]
    fn csv_comparison_tolerates_last_digit_noise() {
        assert!(csv_close(b"t,x\n1.0,2.0\n", b"t,x\n1.0,2.0000000000001\n"));
        assert!(!csv_close(b"t,x\n1.0,2.0\n", b"t,x\n1.0,2.1\n"));
        assert!(!csv_close(b"t,x\n1.0,2.0\n", b"t,x\n1.0,2.0\n3,4\n"));
    }

    #[test]
    fn json_comparison_is_structural() {
        assert!(json_close(
            br#"{"a":[1.0,2.0]}"#,
            br#"{"a":[1.0,2.0000000000001]}"#
        ));
        assert!(!json_close(br#"{"a":[1.0]}"#, br#"{"b":[1.0]}"#));
    }
}
