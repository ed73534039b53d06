//! Run manifests. Every command records the argv it was invoked with, the
//! digests of the files it read, the environment overrides it consumed, and
//! the files it wrote. `pathrank rerun --manifest <file>` replays the argv
//! against verified-unchanged inputs, which must reproduce every output byte
//! for byte. Manifests carry no timestamps for exactly that reason.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pathrank::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    /// Argv after the program name, exactly as dispatched.
    pub argv: Vec<String>,
    /// Input path -> sha256 hex digest at run time.
    pub inputs: BTreeMap<String, String>,
    /// PATHRANK_* environment overrides in effect during the run.
    pub env: BTreeMap<String, String>,
    /// Files the command wrote, excluding the manifest itself.
    pub outputs: Vec<String>,
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(argv: Vec<String>, env: BTreeMap<String, String>) -> Self {
        Manifest { version: MANIFEST_VERSION, argv, inputs: BTreeMap::new(), env, outputs: Vec::new() }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), digest_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Written next to the command's primary output as `<out>.manifest.json`.
    pub fn manifest_path(out: &Path) -> PathBuf {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::validation(format!("manifest encode failed: {e}")))?;
        bytes.push(b'\n');
        fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(0, format!("manifest decode failed: {e}")))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::validation(format!(
                "manifest version {} unsupported (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        Ok(manifest)
    }

    /// A rerun is only byte-reproducible if the inputs still hash the same.
    pub fn verify_inputs(&self) -> Result<()> {
        for (path, recorded) in &self.inputs {
            let current = digest_file(Path::new(path))?;
            if &current != recorded {
                return Err(Error::validation(format!(
                    "input {path} changed since the manifest was written (sha256 {current} != {recorded})"
                )));
            }
        }
        Ok(())
    }
}
