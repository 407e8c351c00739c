//! JSON bodies exchanged over HTTP.
//!
//! Computed floating-point values (similarities, precision, recall) are
//! rounded to 9 significant digits on the way out.

use cbir_core::executor::{QueryDefaults, QueryMode, QueryOptions};
use cbir_core::model::{ImageRecord, IndexParams};
use cbir_core::simulation::{Aggregate, RetrievalFactors, SimulationReport};
use serde::{Deserialize, Serialize};

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub(crate) mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}

/// An image as uploaded or downloaded; `imageBytes` travels as base64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ImageContract {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub name: String,
    #[serde(default)]
    pub class_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(with = "base64_bytes")]
    pub image_bytes: Vec<u8>,
}

impl From<ImageRecord> for ImageContract {
    fn from(img: ImageRecord) -> Self {
        Self {
            id: Some(img.id),
            name: img.name,
            class_label: Some(img.class_label),
            width: Some(img.width),
            height: Some(img.height),
            image_bytes: img.bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageSummary {
    pub id: u64,
    pub name: String,
    pub class_label: String,
    pub width: u32,
    pub height: u32,
}

impl From<&ImageRecord> for ImageSummary {
    fn from(img: &ImageRecord) -> Self {
        Self {
            id: img.id,
            name: img.name.clone(),
            class_label: img.class_label.clone(),
            width: img.width,
            height: img.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImagePage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<ImageSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PageParams {
    #[serde(default)]
    pub offset: usize,
    #[serde(default = "default_limit")]
    pub limit: usize,
}

pub const MAX_PAGE: usize = 1000;

fn default_limit() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreatedImage {
    pub image_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreatedIndex {
    pub index_id: u64,
}

/// Index build parameters; omitted fields take the configured defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct IndexRequest {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
    pub convergence_eps: Option<f64>,
}

impl IndexRequest {
    pub fn resolve(&self, defaults: &IndexParams) -> IndexParams {
        IndexParams {
            k: self.k.unwrap_or(defaults.k),
            max_iterations: self.max_iterations.unwrap_or(defaults.max_iterations),
            convergence_eps: self.convergence_eps.unwrap_or(defaults.convergence_eps),
            seed: self.seed.unwrap_or(defaults.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexSummary {
    pub id: u64,
    pub k: usize,
    pub created_at: u64,
    pub params: IndexParams,
    pub image_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexList {
    pub items: Vec<IndexSummary>,
}

/// Query options as sent by clients; omitted fields take the configured
/// defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OptionsRequest {
    pub index_id: Option<u64>,
    pub mode: Option<QueryMode>,
    pub top_k: Option<usize>,
    pub min_similarity: Option<f64>,
}

impl OptionsRequest {
    pub fn resolve(&self, defaults: &QueryDefaults, index_id: u64) -> QueryOptions {
        QueryOptions {
            index_id,
            mode: self.mode.unwrap_or(defaults.mode),
            top_k: self.top_k.unwrap_or(defaults.top_k),
            min_similarity: self.min_similarity.unwrap_or(defaults.min_similarity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryHit {
    pub image_id: u64,
    pub name: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryResponse {
    pub entries: Vec<QueryHit>,
    pub query_descriptor_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulateSingleRequest {
    pub query_image_id: u64,
    pub index_id: u64,
    #[serde(default)]
    pub options: OptionsRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SplitRequest {
    pub ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Multi-query simulation. The query images are `querySet` when given,
/// otherwise the query side of `split`, otherwise every image the index
/// does not cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulateMultiRequest {
    pub index_id: u64,
    #[serde(default)]
    pub options: OptionsRequest,
    #[serde(default)]
    pub split: Option<SplitRequest>,
    #[serde(default)]
    pub query_set: Option<Vec<u64>>,
}

pub fn round_factors(mut f: RetrievalFactors) -> RetrievalFactors {
    f.precision = round_sig9(f.precision);
    f.recall = round_sig9(f.recall);
    f
}

pub fn round_report(report: SimulationReport) -> SimulationReport {
    SimulationReport {
        rows: report.rows.into_iter().map(round_factors).collect(),
        aggregate: Aggregate {
            mean_precision: report.aggregate.mean_precision.map(round_sig9),
            mean_recall: report.aggregate.mean_recall.map(round_sig9),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub images: usize,
    pub indexes: usize,
}
