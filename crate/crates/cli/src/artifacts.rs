//! Output files and their provenance sidecars.
//!
//! Sidecars carry input basenames and digests, never absolute paths or
//! timestamps, so repeated runs produce byte-identical directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    artifact: &'a str,
    artifact_sha256: String,
    inputs: &'a [InputDigest],
    seed: u64,
    params: &'a Map<String, Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn basename(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn digest_inputs(paths: &[&Path]) -> Result<Vec<InputDigest>, Failure> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            Ok(InputDigest { file: basename(p), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

/// Genre ids become part of file names; anything outside `[A-Za-z0-9._-]`
/// is replaced by `_`.
pub fn file_tag(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Writes artifacts into one directory, each followed by `<name>.meta.json`.
pub struct OutputDir {
    dir: PathBuf,
    command: &'static str,
    inputs: Vec<InputDigest>,
    seed: u64,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &'static str, inputs: Vec<InputDigest>, seed: u64) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_owned(), command, inputs, seed, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8], params: &Map<String, Value>) -> Result<(), Failure> {
        let sidecar = Sidecar {
            tool: "latent-split",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            artifact: name,
            artifact_sha256: sha256_hex(bytes),
            inputs: &self.inputs,
            seed: self.seed,
            params,
        };
        self.put(name, bytes)?;
        self.put(&format!("{name}.meta.json"), &json_bytes(&sidecar)?)?;
        self.written.push(name.to_owned());
        Ok(())
    }

    fn put(&self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Data(format!("serializing JSON: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn csv_bytes<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, Failure> {
    let fail = |e: csv::Error| Failure::Data(format!("writing CSV: {e}"));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Failure::Data(format!("writing CSV: {e}")))
}

/// Builds a parameter map from `(key, value)` pairs.
pub fn params<const N: usize>(pairs: [(&str, Value); N]) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}
