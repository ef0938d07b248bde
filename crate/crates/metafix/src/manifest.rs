use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliResult, Failure};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance of one command run. The embedded config is the canonical
/// TOML the command executed, so a rerun needs nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    /// Output file names, relative to the output location.
    pub outputs: Vec<String>,
    pub config: String,
}

pub fn digest(text: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(text.as_bytes())))
}

impl RunManifest {
    pub fn new(command: &str, config: String, seed: u64, outputs: &[&str]) -> Self {
        RunManifest {
            command: command.into(),
            version: VERSION.into(),
            config_digest: digest(&config),
            seed,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            config,
        }
    }

    /// Comment lines that open every output file.
    pub fn header(&self) -> String {
        format!(
            "# metafix {}\n# command: {}\n# config_digest: {}\n# seed: {}\n# outputs: {}\n",
            self.version,
            self.command,
            self.config_digest,
            self.seed,
            self.outputs.join(", ")
        )
    }

    pub fn verify(&self) -> CliResult<()> {
        let d = digest(&self.config);
        if d != self.config_digest {
            return Err(Failure::Usage(format!(
                "manifest digest {} does not match its config ({d})",
                self.config_digest
            )));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let body = toml::to_string(self).map_err(|e| Failure::Usage(format!("cannot encode manifest: {e}")))?;
        fs::write(path, format!("{}{body}", self.header()))?;
        Ok(())
    }

    /// Loads a manifest written for `command` and checks its digest.
    pub fn load(path: &Path, command: &str) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let m: RunManifest =
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("malformed manifest {}: {e}", path.display())))?;
        if m.command != command {
            return Err(Failure::Usage(format!("manifest was written by `{}`, not `{command}`", m.command)));
        }
        m.verify()?;
        Ok(m)
    }
}
