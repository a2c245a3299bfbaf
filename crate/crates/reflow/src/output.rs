//! Artifact files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::RunError;

/// Decimal with 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    /// The effective config (overrides applied, output directory omitted).
    pub config: ExperimentConfig,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String, RunError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files into one directory and records their digests.
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileEntry { path: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Builds a CSV in memory with `header`, letting `fill` append records.
    pub fn write_csv<F>(&mut self, name: &str, header: &[String], fill: F) -> Result<(), RunError>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), RunError>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        fill(&mut w)?;
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn into_files(self) -> Vec<FileEntry> {
        self.files
    }
}

/// `prefix_1, …, prefix_d`
pub fn coord_headers(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|c| format!("{prefix}_{c}")).collect()
}

pub fn header(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn digest_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
