use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use hae_core::train::{peak_resident_bytes, Timing};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub path: String,
    /// Filled in once the command has finished writing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

/// Provenance record written next to every output. The only
/// non-reproducible fields are the timestamps and `timing`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<OutputEntry>,
    pub started_unix: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// A manifest that has been written in its pre-run form and is rewritten
/// with output hashes by [`ManifestWriter::finish`].
pub struct ManifestWriter {
    path: PathBuf,
    manifest: RunManifest,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl ManifestWriter {
    /// Hashes `inputs` and writes the manifest before any computation.
    pub fn begin(
        path: PathBuf,
        command: &str,
        seed: Option<u64>,
        config: serde_json::Value,
        inputs: &[PathBuf],
        outputs: Vec<PathBuf>,
    ) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(FileHash {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            inputs,
            outputs: outputs
                .iter()
                .map(|p| OutputEntry {
                    path: p.display().to_string(),
                    sha256: None,
                })
                .collect(),
            started_unix: unix_now(),
            finished_unix: None,
            timing: None,
        };
        let writer = Self {
            path,
            manifest,
            outputs,
            start: Instant::now(),
        };
        writer.write()?;
        Ok(writer)
    }

    fn write(&self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&self.path, json + "\n").with_context(|| format!("writing {}", self.path.display()))
    }

    /// Records output hashes and timing. `timing` overrides the writer's own
    /// wall clock when the command measured a narrower span.
    pub fn finish(mut self, timing: Option<Timing>) -> Result<()> {
        for (entry, path) in self.manifest.outputs.iter_mut().zip(&self.outputs) {
            entry.sha256 = Some(sha256_file(path)?);
        }
        self.manifest.finished_unix = Some(unix_now());
        self.manifest.timing = Some(timing.unwrap_or_else(|| Timing {
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            peak_resident_bytes: peak_resident_bytes(),
        }));
        self.write()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hashes_inputs_then_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        let output = dir.path().join("out.txt");
        let path = dir.path().join(FILE_NAME);
        let w = ManifestWriter::begin(path.clone(), "test", Some(1), serde_json::json!({}), &[input], vec![output.clone()]).unwrap();

        let early: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(
            early["inputs"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(early["outputs"][0].get("sha256").is_none());

        fs::write(&output, "").unwrap();
        w.finish(None).unwrap();
        let done: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(
            done["outputs"][0]["sha256"],
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert!(done["timing"]["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    }
}
