//! `run_manifest.json`: config snapshot, tool version, input digests and
//! outputs of one command. No timestamps, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Loaded;
use crate::error::CliError;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct InputFile {
    /// As written in the config.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub inputs: BTreeMap<String, InputFile>,
    pub outputs: Vec<String>,
    pub counts: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &'static str, l: &Loaded) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: serde_json::to_value(&l.config).unwrap_or(Value::Null),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            counts: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn input_file(mut self, name: &str, l: &Loaded, path: &Path) -> Result<Self, CliError> {
        let digest = sha256_file(&l.resolve(path))?;
        self.inputs.insert(
            name.to_string(),
            InputFile {
                path: path.display().to_string(),
                sha256: digest,
            },
        );
        Ok(self)
    }

    pub fn optional_input(self, name: &str, l: &Loaded, path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => self.input_file(name, l, p),
            None => Ok(self),
        }
    }

    pub fn outputs(mut self, outputs: Vec<String>) -> Self {
        self.outputs = outputs;
        self
    }

    pub fn count(mut self, name: &str, n: usize) -> Self {
        self.counts.insert(name.to_string(), n);
        self
    }

    pub fn extra(mut self, name: &str, v: Value) -> Self {
        self.extra.insert(name.to_string(), v);
        self
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(RUN_MANIFEST);
        let text = serde_json::to_string_pretty(self).expect("serialisable") + "\n";
        fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
