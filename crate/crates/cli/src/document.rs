//! The JSON model document written by `fit` and read by later stages.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, Stage};
use crate::pipeline::FittedModels;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    /// Path as written in the configuration.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub config: PipelineConfig,
    /// RFC 3339 creation time; excluded from the reproducibility hash.
    pub timestamp: String,
    /// SHA-256 of the document with `timestamp` and this field blanked.
    pub reproducibility_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub models: FittedModels,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::file(Stage::Config, path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

impl ModelDocument {
    pub fn new(models: FittedModels, config: PipelineConfig, inputs: Vec<InputDigest>) -> Result<Self, CliError> {
        let mut doc = ModelDocument {
            schema_version: SCHEMA_VERSION,
            provenance: Provenance {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                inputs,
                config,
                timestamp: now_rfc3339(),
                reproducibility_hash: String::new(),
            },
            models,
        };
        doc.provenance.reproducibility_hash = doc.compute_hash()?;
        Ok(doc)
    }

    /// Hash over the canonical JSON with the volatile fields blanked.
    pub fn compute_hash(&self) -> Result<String, CliError> {
        let mut blank = self.clone();
        blank.provenance.timestamp.clear();
        blank.provenance.reproducibility_hash.clear();
        Ok(hex::encode(Sha256::digest(blank.encode()?.as_bytes())))
    }

    fn encode(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::file(Stage::Output, "<model document>", e))
    }

    /// Serializes and checks that the text parses back to the same document
    /// (non-finite numbers would not).
    pub fn to_json(&self) -> Result<String, CliError> {
        let text = self.encode()?;
        match serde_json::from_str::<ModelDocument>(&text) {
            Ok(back) if back == *self => Ok(text),
            _ => Err(CliError::file(Stage::Output, "<model document>", "model contains non-finite values")),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid model document: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "model document schema {} is not supported (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::file(Stage::Output, path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::file(Stage::Config, path, e))?;
        Self::from_json(&text)
    }
}
