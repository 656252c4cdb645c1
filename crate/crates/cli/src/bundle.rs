//! Output bundles: every file a command writes is recorded with its
//! SHA-256, and `manifest.json` lists them together with the inputs and
//! the resolved arguments. The manifest carries no wall-clock time, so two
//! runs of the same simulated bundle produce identical manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Resolved arguments of the command.
    pub args: serde_json::Value,
    pub seed: Option<u64>,
    /// Resolved scenario config, for simulated bundles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_toml: Option<String>,
    pub config_sha256: Option<String>,
    pub inputs: Vec<InputRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("MissingManifest", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config("ManifestParse", format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub struct Bundle {
    dir: PathBuf,
    artifacts: Vec<ArtifactRecord>,
    inputs: Vec<InputRecord>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Bundle, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes.as_ref()).map_err(|e| CliError::io(&path, e))?;
        self.record(name)
    }

    /// Pretty JSON exactly as `serde_json::to_string_pretty` renders it.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("value serializes");
        self.write(name, text)
    }

    pub fn write_csv<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>,
    {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            fill(&mut w).map_err(|e| CliError::io(&self.path(name), e))?;
            w.flush().map_err(|e| CliError::io(&self.path(name), e))?;
        }
        self.write(name, buf)
    }

    /// Records a file some other writer already put in the bundle.
    pub fn record(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.retain(|a| a.name != name);
        self.artifacts.push(ArtifactRecord {
            name: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = hash_file(path)?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        args: serde_json::Value,
        seed: Option<u64>,
        config_toml: Option<String>,
    ) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            tool: "gelab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            seed,
            config_sha256: config_toml.as_deref().map(|t| sha256_hex(t.as_bytes())),
            config_toml,
            inputs: self.inputs,
            artifacts: self.artifacts,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
