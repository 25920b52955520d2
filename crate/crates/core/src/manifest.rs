//! Run manifests: everything needed to reproduce a command's data output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cli::Invocation;
use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "nesy-dcsp";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(InputDigest { path: path.to_path_buf(), sha256: format!("{:x}", Sha256::digest(&bytes)) })
    }

    /// Fails if the file changed since the digest was taken.
    pub fn verify(&self) -> Result<()> {
        let now = InputDigest::of(&self.path)?;
        if now.sha256 != self.sha256 {
            return Err(Error::Manifest(format!(
                "{} changed since the manifest was written (sha256 {} != {})",
                self.path.display(),
                now.sha256,
                self.sha256
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Invocation,
    pub inputs: Vec<InputDigest>,
    pub assumptions: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(invocation: Invocation, inputs: Vec<InputDigest>, assumptions: Vec<String>) -> Self {
        RunManifest {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation,
            inputs,
            assumptions,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if manifest.tool != TOOL_NAME {
            return Err(Error::Manifest(format!("manifest was written by `{}`", manifest.tool)));
        }
        Ok(manifest)
    }
}
