use std::path::{Path, PathBuf};

use hopnet::sim::{Trajectory, GENERATOR_VERSION, TRAJECTORY_VERSION};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::DatasetConfig;
use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub split: String,
    /// Path relative to the dataset directory.
    pub file: String,
    pub seed: u64,
    pub frames: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub trajectory_version: u32,
    pub generator_version: u32,
    pub config: DatasetConfig,
    pub trajectories: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(config: DatasetConfig, trajectories: Vec<ManifestEntry>) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            trajectory_version: TRAJECTORY_VERSION,
            generator_version: GENERATOR_VERSION,
            config,
            trajectories,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest always serializes")
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    /// Reads the manifest of `dir`; the version is checked before the body.
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = Self::path(dir);
        let text = crate::read_text(&path)?;
        let value: toml::Table = toml::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        let found = value.get("format_version").and_then(|v| v.as_integer()).unwrap_or(-1);
        if found > MANIFEST_VERSION as i64 {
            return Err(CliError::Manifest(format!(
                "{}: manifest format version {found} is newer than supported version {MANIFEST_VERSION}; upgrade hopnet",
                path.display()
            )));
        }
        if found != MANIFEST_VERSION as i64 {
            return Err(CliError::Manifest(format!("{}: unsupported manifest format version {found}", path.display())));
        }
        toml::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn entries<'a>(&'a self, split: &'a str) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.trajectories.iter().filter(move |e| e.split == split)
    }

    /// Loads one entry, verifying its checksum.
    pub fn read_entry(dir: &Path, entry: &ManifestEntry) -> Result<Trajectory, CliError> {
        let path = dir.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        let found = sha256_hex(&bytes);
        if found != entry.sha256 {
            return Err(CliError::ChecksumMismatch { file: entry.file.clone(), expected: entry.sha256.clone(), found });
        }
        Trajectory::read(bytes.as_slice()).map_err(|e| CliError::Format(path.display().to_string(), e))
    }

    /// Loads and verifies every trajectory of `split`, in manifest order.
    pub fn load_split(&self, dir: &Path, split: &str) -> Result<Vec<Trajectory>, CliError> {
        self.entries(split).map(|e| Self::read_entry(dir, e)).collect()
    }

    pub fn verify(&self, dir: &Path) -> Result<(), CliError> {
        for e in &self.trajectories {
            Self::read_entry(dir, e)?;
        }
        Ok(())
    }
}
