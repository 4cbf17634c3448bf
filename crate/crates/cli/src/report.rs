use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Warning {
    pub module: &'static str,
    pub message: String,
}

/// Machine-readable record of one invocation.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub status: &'static str,
    pub inputs: Vec<InputDigest>,
    pub output: serde_json::Value,
    pub warnings: Vec<Warning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<f64>,
}

/// Inputs read and warnings raised while a command runs.
#[derive(Debug, Default)]
pub struct RunContext {
    pub inputs: Vec<InputDigest>,
    pub warnings: Vec<Warning>,
}

impl RunContext {
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes =
            std::fs::read(path).with_context(|| format!("cli: cannot read {}", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn warn(&mut self, module: &'static str, message: impl Into<String>) {
        let message = message.into();
        eprintln!("warning [{module}]: {message}");
        self.warnings.push(Warning { module, message });
    }
}
