//! Query execution and image insertion over injected extractor, indexer and
//! store.

use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::config::label_from_name;
use crate::error::{Error, Result};
use crate::features::{ExtractorParams, FeatureExtractor, SurfExtractor};
use crate::index::{self, FeatureIndexer, KMeansIndexer};
use crate::model::{HistogramRecord, ImageRecord, IndexParams, Vocabulary};
use crate::store::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QueryMode {
    /// The `top_k` most similar images.
    #[serde(rename = "topK")]
    TopK,
    /// Every image at least `min_similarity` similar.
    #[default]
    #[serde(rename = "threshold")]
    Threshold,
}

/// Retrieval criterion without the target index, as kept in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct QueryDefaults {
    pub mode: QueryMode,
    pub top_k: usize,
    pub min_similarity: f64,
}

impl Default for QueryDefaults {
    fn default() -> Self {
        Self {
            mode: QueryMode::Threshold,
            top_k: 10,
            min_similarity: 0.5,
        }
    }
}

impl QueryDefaults {
    pub fn options(&self, index_id: u64) -> QueryOptions {
        QueryOptions {
            index_id,
            mode: self.mode,
            top_k: self.top_k,
            min_similarity: self.min_similarity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QueryOptions {
    pub index_id: u64,
    #[serde(default)]
    pub mode: QueryMode,
    /// Only honoured in [`QueryMode::TopK`].
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Only honoured in [`QueryMode::Threshold`].
    #[serde(default = "default_min_similarity")]
    pub min_similarity: f64,
}

fn default_top_k() -> usize {
    QueryDefaults::default().top_k
}

fn default_min_similarity() -> f64 {
    QueryDefaults::default().min_similarity
}

impl QueryOptions {
    pub fn top_k(index_id: u64, k: usize) -> Self {
        Self {
            mode: QueryMode::TopK,
            top_k: k,
            ..QueryDefaults::default().options(index_id)
        }
    }

    pub fn threshold(index_id: u64, min_similarity: f64) -> Self {
        Self {
            mode: QueryMode::Threshold,
            min_similarity,
            ..QueryDefaults::default().options(index_id)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            QueryMode::TopK if self.top_k == 0 => Err(Error::validation("topK must be at least 1")),
            QueryMode::Threshold if !(0.0..=1.0).contains(&self.min_similarity) => Err(Error::validation(
                format!("minSimilarity must lie in [0, 1], got {}", self.min_similarity),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryEntry {
    pub image_id: u64,
    pub similarity: f64,
}

/// Ranked retrieval result: similarity descending, then image id ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryResult {
    pub entries: Vec<QueryEntry>,
    pub query_descriptor_count: usize,
}

/// Cosine similarity of two histograms' weight vectors, 0 when either is all zero.
pub fn similarity(a: &HistogramRecord, b: &HistogramRecord) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::validation(format!(
            "cannot compare histograms with k = {} and k = {}",
            a.k(),
            b.k()
        )));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.bins.iter().zip(&b.bins) {
        dot += x.weight * y.weight;
        na += x.weight * x.weight;
        nb += y.weight * y.weight;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

/// Sorts by similarity descending, ties by ascending image id.
pub fn rank(entries: &mut [QueryEntry]) {
    entries.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.image_id.cmp(&b.image_id))
    });
}

/// An image to be inserted.
#[derive(Debug, Clone, PartialEq)]
pub struct NewImage {
    pub name: String,
    /// Derived from the name when absent.
    pub class_label: Option<String>,
    pub bytes: Vec<u8>,
}

/// Operations every retrieval engine offers on top of its repository.
pub trait Executor {
    fn repository(&self) -> &Store;
    fn create_index(&self, params: &IndexParams) -> Result<u64>;
    fn delete_index(&self, index_id: u64) -> Result<()>;
    fn execute_query(&self, image_bytes: &[u8], options: &QueryOptions) -> Result<QueryResult>;
    fn insert_image(&self, image: NewImage) -> Result<u64>;
}

/// The executor with its collaborators injected at construction.
///
/// Index builds and insertions serialize on an internal writer lock; queries
/// never take it and only see committed store states.
pub struct Engine {
    store: Arc<Store>,
    extractor: Arc<dyn FeatureExtractor>,
    indexer: Arc<dyn FeatureIndexer>,
    writer: Mutex<()>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("store", &self.store).finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(store: Arc<Store>, extractor: Arc<dyn FeatureExtractor>, indexer: Arc<dyn FeatureIndexer>) -> Self {
        Self {
            store,
            extractor,
            indexer,
            writer: Mutex::new(()),
        }
    }

    /// SURF extraction with k-means indexing.
    pub fn surf(store: Arc<Store>, params: ExtractorParams) -> Result<Self> {
        Ok(Self::new(store, Arc::new(SurfExtractor::new(params)?), Arc::new(KMeansIndexer)))
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn extractor(&self) -> &dyn FeatureExtractor {
        self.extractor.as_ref()
    }

    fn write_role(&self) -> MutexGuard<'_, ()> {
        self.writer.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Builds an index over the given images only.
    pub fn create_index_over(&self, params: &IndexParams, image_ids: &[u64]) -> Result<u64> {
        let _role = self.write_role();
        index::create_index(&self.store, self.extractor.as_ref(), self.indexer.as_ref(), params, Some(image_ids))
    }

    /// Extracts and stores descriptor sets for every image lacking one.
    pub fn extract_all(&self) -> Result<usize> {
        let _role = self.write_role();
        let ids: Vec<u64> = self.store.read(|v| v.iter::<ImageRecord>().map(|i| i.id).collect());
        index::ensure_descriptors(&self.store, self.extractor.as_ref(), &ids)
    }
}

impl Executor for Engine {
    fn repository(&self) -> &Store {
        &self.store
    }

    fn create_index(&self, params: &IndexParams) -> Result<u64> {
        let _role = self.write_role();
        index::create_index(&self.store, self.extractor.as_ref(), self.indexer.as_ref(), params, None)
    }

    fn delete_index(&self, index_id: u64) -> Result<()> {
        let _role = self.write_role();
        index::delete_index(&self.store, index_id)
    }

    fn execute_query(&self, image_bytes: &[u8], options: &QueryOptions) -> Result<QueryResult> {
        options.validate()?;
        self.store.read(|v| v.get::<Vocabulary>(options.index_id).map(|_| ()))?;
        let features = self.extractor.extract_features(image_bytes)?;
        let query_descriptor_count = features.descriptors.len();
        if query_descriptor_count == 0 {
            return Ok(QueryResult {
                entries: Vec::new(),
                query_descriptor_count,
            });
        }
        let set = features.into_descriptor_set(0);

        let mut entries = self.store.read(|v| -> Result<Vec<QueryEntry>> {
            let vocabulary = v.get::<Vocabulary>(options.index_id)?;
            let query = self.indexer.build_histogram(&set, vocabulary)?;
            v.histograms_for_index(options.index_id)
                .map(|h| {
                    Ok(QueryEntry {
                        image_id: h.image_id,
                        similarity: similarity(&query, h)?,
                    })
                })
                .collect()
        })?;
        rank(&mut entries);
        match options.mode {
            QueryMode::TopK => entries.truncate(options.top_k),
            QueryMode::Threshold => entries.retain(|e| e.similarity >= options.min_similarity),
        }
        Ok(QueryResult {
            entries,
            query_descriptor_count,
        })
    }

    fn insert_image(&self, image: NewImage) -> Result<u64> {
        if image.name.trim().is_empty() {
            return Err(Error::validation("image name must not be empty"));
        }
        if image.bytes.is_empty() {
            return Err(Error::validation("image bytes must not be empty"));
        }
        let class_label = match image.class_label {
            Some(label) if !label.trim().is_empty() => label,
            _ => label_from_name(&image.name),
        };
        let features = self.extractor.extract_features(&image.bytes)?;

        let _role = self.write_role();
        self.store.write(|tx| {
            let id = tx.add(ImageRecord {
                id: 0,
                name: image.name,
                class_label,
                width: features.width,
                height: features.height,
                bytes: image.bytes,
            })?;
            let set = features.into_descriptor_set(id);
            let vocabularies: Vec<Vocabulary> = tx.view().iter::<Vocabulary>().cloned().collect();
            for vocabulary in &vocabularies {
                let histogram = self.indexer.build_histogram(&set, vocabulary)?;
                tx.add(histogram)?;
            }
            tx.add(set)?;
            Ok(id)
        })
    }
}
