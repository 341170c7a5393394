//! Output bookkeeping: every artifact carries tool version, seed and the
//! hash of the effective configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "fockgen";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    /// SHA-256 of the effective configuration as canonical JSON.
    pub config_sha256: String,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &'static str, seed: Option<u64>, config: &C) -> Self {
        let canonical = serde_json::to_vec(config).expect("config serializes");
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            seed,
            config_sha256: sha256_hex(&canonical),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files and writes them with a `manifest.json` listing
/// each file's hash next to the provenance.
pub struct OutputDir {
    dir: PathBuf,
    provenance: Provenance,
    files: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    files: &'a BTreeMap<String, String>,
}

#[derive(Serialize)]
struct WithProvenance<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

impl OutputDir {
    pub fn create(dir: &Path, provenance: Provenance) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes `body` as pretty JSON with the provenance block in front.
    pub fn write_json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let doc = WithProvenance {
            provenance: &self.provenance,
            body,
        };
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("report serializes");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self) -> Result<(), CliError> {
        let manifest = Manifest {
            provenance: &self.provenance,
            files: &self.files,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, bytes).map_err(|e| CliError::Io(path.display().to_string(), e))
    }
}
