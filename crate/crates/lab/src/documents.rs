//! JSON documents: saved models, simulation sidecars and run provenance.

use std::path::Path;

use qbplab_core::simgen::DesignId;
use qbplab_core::{FittedModel, Method, Params};
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT: &str = "qbplab-model";
pub const MODEL_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },

    #[error("{path}: unsupported document '{format}' version {version} (expected '{MODEL_FORMAT}' version {MODEL_VERSION})")]
    Version { path: String, format: String, version: u32 },
}

/// A fitted model with the biomarker names it expects, in column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub params: Params,
    pub biomarkers: Vec<String>,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(method: Method, params: Params, biomarkers: Vec<String>, model: FittedModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            method,
            params,
            biomarkers,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DocumentError> {
        save_json(self, path)
    }

    /// Rejects documents written in another format or version.
    pub fn load(path: &Path) -> Result<Self, DocumentError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| DocumentError::File {
            path: shown.clone(),
            source,
        })?;
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let json_err = |source| DocumentError::Json {
            path: shown.clone(),
            source,
        };
        let header: Header = serde_json::from_str(&text).map_err(json_err)?;
        if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
            return Err(DocumentError::Version {
                path: shown,
                format: header.format,
                version: header.version,
            });
        }
        serde_json::from_str(&text).map_err(json_err)
    }
}

/// Written next to a simulated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSidecar {
    pub design: DesignId,
    pub seed: u64,
    pub n: usize,
    pub n_cases: usize,
    pub biomarkers: Vec<String>,
    pub relevant: Vec<bool>,
    /// Path of the correlation file, or `None` for independent biomarkers.
    pub correlation: Option<String>,
    pub tool_version: String,
}

/// Everything needed to rerun a command. Only `created_unix` varies between
/// identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub config: serde_json::Value,
    pub created_unix: u64,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, threads: usize, config: serde_json::Value) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool: "qbplab".into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            threads,
            config,
            created_unix,
        }
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), DocumentError> {
    let shown = path.display().to_string();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| DocumentError::Json {
        path: shown.clone(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| DocumentError::File { path: shown, source })
}
