use crate::error::{Error, Result};
use crate::model::{DescriptorSet, HistogramRecord, Vocabulary};

use super::kmeans::nearest;

/// Visual word of `point`: the centroid with the smallest squared Euclidean
/// distance, ties broken by the lowest index.
pub fn assign_nearest(centroids: &[Vec<f64>], point: &[f64]) -> Result<usize> {
    if centroids.is_empty() {
        return Err(Error::validation("no centroids to assign to"));
    }
    if let Some(c) = centroids.iter().find(|c| c.len() != point.len()) {
        return Err(Error::validation(format!(
            "point has {} elements, centroid has {}",
            point.len(),
            c.len()
        )));
    }
    Ok(nearest(centroids, point).0)
}

/// L1-normalized bag-of-words histogram of `set` over `vocabulary`. An empty
/// descriptor set yields the all-zero histogram.
pub fn build_histogram(set: &DescriptorSet, vocabulary: &Vocabulary) -> Result<HistogramRecord> {
    let mut counts = vec![0usize; vocabulary.k];
    for d in &set.descriptors {
        counts[assign_nearest(&vocabulary.centroids, d)?] += 1;
    }
    let total = set.descriptors.len();
    let weights: Vec<f64> = if total == 0 {
        vec![0.0; vocabulary.k]
    } else {
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    Ok(HistogramRecord::from_weights(set.image_id, vocabulary.id, &weights))
}
