//! Engine configuration file and class-label derivation.
//!
//! The configuration is a single TOML document; every section is optional
//! and unknown keys are rejected:
//!
//! ```toml
//! labeling = "directory"          # or "filename-prefix"
//!
//! [extractor]
//! octaves = 3
//! intervalsPerOctave = 4
//! hessianThreshold = 0.0004
//! initialSamplingStep = 2
//! dxyWeight = 0.9
//!
//! [indexer]
//! k = 128
//! maxIterations = 100
//! convergenceEps = 1e-4
//! seed = 0
//!
//! [query]
//! mode = "threshold"              # or "topK"
//! topK = 10
//! minSimilarity = 0.5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{QueryDefaults, QueryOptions};
use crate::features::ExtractorParams;
use crate::model::IndexParams;

/// Where an ingested image's class label comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labeling {
    /// Name of the directory containing the file.
    #[default]
    Directory,
    /// File name up to the first space (`"1 (2).jpg"` is labelled `"1"`).
    FilenamePrefix,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct EngineConfig {
    pub extractor: ExtractorParams,
    pub indexer: IndexParams,
    pub query: QueryDefaults,
    pub labeling: Labeling,
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: EngineConfig =
            toml::from_str(text).map_err(|e| Error::validation(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Storage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.extractor.validate()?;
        self.indexer.validate()?;
        self.query.options(0).validate()
    }

    pub fn query_options(&self, index_id: u64) -> QueryOptions {
        self.query.options(index_id)
    }
}

/// Class label taken from a file name: the text before the first space, or
/// the file stem when there is none.
pub fn label_from_name(name: &str) -> String {
    let base = Path::new(name)
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or(name);
    match base.split_once(' ') {
        Some((prefix, _)) if !prefix.is_empty() => prefix.to_string(),
        _ => Path::new(base)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(base)
            .to_string(),
    }
}

/// Class label of the file at `path` under the chosen scheme. Directory
/// labelling falls back to the file name when the file has no parent.
pub fn derive_label(path: &Path, labeling: Labeling) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    match labeling {
        Labeling::FilenamePrefix => label_from_name(name),
        Labeling::Directory => path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| label_from_name(name)),
    }
}
