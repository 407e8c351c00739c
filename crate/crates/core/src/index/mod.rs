//! Visual vocabulary construction and index lifecycle.

mod histogram;
mod kmeans;

use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

pub use self::histogram::{assign_nearest, build_histogram};
pub use self::kmeans::{kmeans, kmeans_observed, kmeans_plus_plus, lloyd, ClusteringResult, Iteration};

use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::model::{DescriptorSet, HistogramRecord, ImageRecord, IndexParams, Vocabulary};
use crate::store::Store;

/// Builds vocabularies from pooled descriptors and quantizes descriptor sets
/// against them.
pub trait FeatureIndexer: Send + Sync {
    /// Returns the `params.k` visual words learned from `descriptors`.
    fn build_vocabulary(&self, descriptors: &[Vec<f64>], params: &IndexParams) -> Result<Vec<Vec<f64>>>;

    fn build_histogram(&self, set: &DescriptorSet, vocabulary: &Vocabulary) -> Result<HistogramRecord>;
}

/// Vocabulary by k-means over raw descriptors, hard assignment to the nearest word.
#[derive(Debug, Clone, Copy, Default)]
pub struct KMeansIndexer;

impl FeatureIndexer for KMeansIndexer {
    fn build_vocabulary(&self, descriptors: &[Vec<f64>], params: &IndexParams) -> Result<Vec<Vec<f64>>> {
        Ok(kmeans(descriptors, params)?.centroids)
    }

    fn build_histogram(&self, set: &DescriptorSet, vocabulary: &Vocabulary) -> Result<HistogramRecord> {
        build_histogram(set, vocabulary)
    }
}

/// Extracts and stores descriptor sets for the listed images that lack one.
pub fn ensure_descriptors(store: &Store, extractor: &dyn FeatureExtractor, image_ids: &[u64]) -> Result<usize> {
    let missing: Vec<(u64, Vec<u8>)> = store.read(|v| {
        image_ids
            .iter()
            .filter(|id| v.find::<DescriptorSet>(**id).is_none())
            .filter_map(|id| v.find::<ImageRecord>(*id).map(|img| (img.id, img.bytes.clone())))
            .collect()
    });
    if missing.is_empty() {
        return Ok(0);
    }
    let extracted: Vec<DescriptorSet> = missing
        .par_iter()
        .map(|(id, bytes)| Ok(extractor.extract_features(bytes)?.into_descriptor_set(*id)))
        .collect::<Result<_>>()?;
    store.write(|tx| {
        let mut added = 0;
        for set in extracted {
            let present = tx.view().find::<ImageRecord>(set.image_id).is_some()
                && tx.view().find::<DescriptorSet>(set.image_id).is_none();
            if present {
                tx.add(set)?;
                added += 1;
            }
        }
        Ok(added)
    })
}

/// Builds a new index over every stored image, or over `scope` when given.
///
/// Descriptors are pooled from the images' stored descriptor sets (extracted
/// on demand), clustered into a vocabulary, and one histogram per image is
/// persisted. Existing indexes are left untouched. The clustering runs
/// without holding the store's write lock.
pub fn create_index(
    store: &Store,
    extractor: &dyn FeatureExtractor,
    indexer: &dyn FeatureIndexer,
    params: &IndexParams,
    scope: Option<&[u64]>,
) -> Result<u64> {
    params.validate()?;
    let image_ids: Vec<u64> = match scope {
        Some(ids) => {
            store.read(|v| ids.iter().try_for_each(|id| v.get::<ImageRecord>(*id).map(|_| ())))?;
            let mut ids = ids.to_vec();
            ids.sort_unstable();
            ids.dedup();
            ids
        }
        None => store.read(|v| v.iter::<ImageRecord>().map(|i| i.id).collect()),
    };
    if image_ids.is_empty() {
        return Err(Error::InsufficientData("no images to index".into()));
    }
    ensure_descriptors(store, extractor, &image_ids)?;

    let pooled: Vec<Vec<f64>> = store.read(|v| {
        image_ids
            .iter()
            .filter_map(|id| v.find::<DescriptorSet>(*id))
            .flat_map(|s| s.descriptors.iter().cloned())
            .collect()
    });
    if pooled.len() < params.k {
        return Err(Error::InsufficientData(format!(
            "{} descriptors across {} images cannot form a vocabulary of {} words",
            pooled.len(),
            image_ids.len(),
            params.k
        )));
    }
    let centroids = indexer.build_vocabulary(&pooled, params)?;
    drop(pooled);

    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    store.write(|tx| {
        let mut vocabulary = Vocabulary {
            id: 0,
            k: params.k,
            centroids,
            created_at,
            params: *params,
        };
        vocabulary.id = tx.add(vocabulary.clone())?;
        for id in &image_ids {
            let Some(set) = tx.view().find::<DescriptorSet>(*id).cloned() else {
                continue;
            };
            let histogram = indexer.build_histogram(&set, &vocabulary)?;
            tx.add(histogram)?;
        }
        Ok(vocabulary.id)
    })
}

/// Removes an index and all of its histograms.
pub fn delete_index(store: &Store, index_id: u64) -> Result<()> {
    store.write(|tx| tx.delete::<Vocabulary>(index_id))
}
