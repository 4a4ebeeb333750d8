//! Run provenance. Every command leaves a manifest next to its output with
//! enough detail (argv, input hashes, seeds, parameters) to re-run it
//! bit-identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use cytotwin_core::calibrate::write_atomic;

#[derive(Serialize)]
struct PipelineManifest<'a> {
    tool_version: &'static str,
    command: &'a [String],
    /// Input path -> sha256 (directories hash their sorted file table).
    inputs: &'a BTreeMap<String, String>,
    seeds: &'a BTreeMap<String, u64>,
    parameters: &'a serde_json::Value,
    duration_seconds: f64,
}

pub struct ManifestBuilder {
    started: Instant,
    command: Vec<String>,
    inputs: BTreeMap<String, String>,
    seeds: BTreeMap<String, u64>,
    parameters: serde_json::Value,
}

impl ManifestBuilder {
    pub fn new() -> ManifestBuilder {
        ManifestBuilder {
            started: Instant::now(),
            command: std::env::args().collect(),
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            parameters: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = hash_path(path).with_context(|| format!("hashing input {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn parameters(&mut self, params: impl Serialize) -> Result<()> {
        self.parameters = serde_json::to_value(params)?;
        Ok(())
    }

    /// Write the manifest beside `out`: `<name>.manifest.json` for a file
    /// output, `pipeline_manifest.json` inside a directory output.
    pub fn write_next_to(self, out: &Path) -> Result<PathBuf> {
        let doc = PipelineManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            inputs: &self.inputs,
            seeds: &self.seeds,
            parameters: &self.parameters,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = if out.is_dir() {
            out.join("pipeline_manifest.json")
        } else {
            let name = out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "out".into());
            out.with_file_name(format!("{name}.manifest.json"))
        };
        write_atomic(&path, &serde_json::to_string_pretty(&doc)?)?;
        Ok(path)
    }
}

/// sha256 of a file's bytes, or for a directory, of its recursive
/// `relative_path\n<file sha>\n` table in sorted order.
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files)?;
        files.sort();
        let mut h = Sha256::new();
        for rel in files {
            let body = std::fs::read(path.join(&rel))?;
            h.update(rel.as_bytes());
            h.update(b"\n");
            h.update(hex(&Sha256::digest(&body)));
            h.update(b"\n");
        }
        Ok(hex(&h.finalize()))
    } else {
        let body = std::fs::read(path)?;
        Ok(hex(&Sha256::digest(&body)))
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            out.push(
                p.strip_prefix(root)
                    .expect("walked path stays under root")
                    .to_string_lossy()
                    .into_owned(),
            );
        }
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
