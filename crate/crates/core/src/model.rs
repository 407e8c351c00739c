//! Persisted entities: images, their local descriptors, visual vocabularies
//! and the bag-of-words histograms tying the two together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of an upright SURF descriptor.
pub const DESCRIPTOR_LEN: usize = 64;

/// Tolerance on the unit L2 norm of stored descriptors.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Tolerance on the L1 mass of a non-empty histogram.
pub const HISTOGRAM_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    /// Original file name.
    pub name: String,
    pub class_label: String,
    pub width: u32,
    pub height: u32,
    /// The original encoded image (PNG or JPEG).
    #[serde(with = "crate::codec::bytes")]
    pub bytes: Vec<u8>,
}

impl ImageRecord {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("image name must not be empty"));
        }
        if self.class_label.trim().is_empty() {
            return Err(Error::validation("image class label must not be empty"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation(format!(
                "image dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.bytes.is_empty() {
            return Err(Error::validation("image bytes must not be empty"));
        }
        Ok(())
    }
}

/// Location and scale of a detected interest point, stored next to its descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    /// Sign of the Laplacian (trace of the Hessian), `1` or `-1`.
    pub laplacian_sign: i8,
}

/// The local features of one image. Keyed by the image id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSet {
    pub image_id: u64,
    #[serde(with = "crate::codec::vectors")]
    pub descriptors: Vec<Vec<f64>>,
    pub points: Vec<KeyPoint>,
}

impl DescriptorSet {
    pub fn empty(image_id: u64) -> Self {
        Self {
            image_id,
            descriptors: Vec::new(),
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// Checks the shape invariants against the dimensions of the owning image.
    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        if self.points.len() != self.descriptors.len() {
            return Err(Error::validation(format!(
                "{} points for {} descriptors",
                self.points.len(),
                self.descriptors.len()
            )));
        }
        for (i, d) in self.descriptors.iter().enumerate() {
            if d.len() != DESCRIPTOR_LEN {
                return Err(Error::validation(format!(
                    "descriptor {i} has {} elements, expected {DESCRIPTOR_LEN}",
                    d.len()
                )));
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("descriptor {i} is not finite")));
            }
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::validation(format!(
                    "descriptor {i} has L2 norm {norm}, expected 1"
                )));
            }
        }
        for (i, p) in self.points.iter().enumerate() {
            let inside = p.x >= 0.0 && p.y >= 0.0 && p.x < width as f64 && p.y < height as f64;
            if !inside {
                return Err(Error::validation(format!(
                    "point {i} at ({}, {}) lies outside {width}x{height}",
                    p.x, p.y
                )));
            }
            if p.scale.is_nan() || p.scale <= 0.0 || (p.laplacian_sign != 1 && p.laplacian_sign != -1) {
                return Err(Error::validation(format!("point {i} has invalid scale or sign")));
            }
        }
        Ok(())
    }
}

/// k-means configuration used to build a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct IndexParams {
    /// Vocabulary size.
    pub k: usize,
    pub max_iterations: usize,
    pub convergence_eps: f64,
    pub seed: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            k: 128,
            max_iterations: 100,
            convergence_eps: 1e-4,
            seed: 0,
        }
    }
}

impl IndexParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::validation(format!("k must be at least 2, got {}", self.k)));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("maxIterations must be at least 1"));
        }
        if !self.convergence_eps.is_finite() || self.convergence_eps <= 0.0 {
            return Err(Error::validation("convergenceEps must be a positive number"));
        }
        Ok(())
    }
}

/// A visual vocabulary: the k centroids produced by clustering pooled descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub id: u64,
    pub k: usize,
    #[serde(with = "crate::codec::vectors")]
    pub centroids: Vec<Vec<f64>>,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub params: IndexParams,
}

impl Vocabulary {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::validation(format!("vocabulary k must be at least 2, got {}", self.k)));
        }
        if self.centroids.len() != self.k {
            return Err(Error::validation(format!(
                "vocabulary has {} centroids, expected k = {}",
                self.centroids.len(),
                self.k
            )));
        }
        for (i, c) in self.centroids.iter().enumerate() {
            if c.len() != DESCRIPTOR_LEN {
                return Err(Error::validation(format!(
                    "centroid {i} has {} elements, expected {DESCRIPTOR_LEN}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("centroid {i} is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub word_index: u32,
    pub weight: f64,
}

/// Bag-of-visual-words histogram of one image under one vocabulary.
///
/// Bins are always dense in memory: `bins[i].word_index == i` for every `i < k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRecord {
    pub id: u64,
    pub image_id: u64,
    pub index_id: u64,
    pub bins: Vec<BinRecord>,
}

impl HistogramRecord {
    pub fn from_weights(image_id: u64, index_id: u64, weights: &[f64]) -> Self {
        let bins = weights
            .iter()
            .enumerate()
            .map(|(i, &weight)| BinRecord {
                word_index: i as u32,
                weight,
            })
            .collect();
        Self {
            id: 0,
            image_id,
            index_id,
            bins,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.weight).collect()
    }

    pub fn k(&self) -> usize {
        self.bins.len()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.bins.len() != k {
            return Err(Error::validation(format!(
                "histogram has {} bins, vocabulary has k = {k}",
                self.bins.len()
            )));
        }
        for (i, bin) in self.bins.iter().enumerate() {
            if bin.word_index as usize != i {
                return Err(Error::validation(format!(
                    "bin {i} carries word index {}",
                    bin.word_index
                )));
            }
            if !bin.weight.is_finite() || bin.weight < 0.0 {
                return Err(Error::validation(format!("bin {i} has weight {}", bin.weight)));
            }
        }
        let mass: f64 = self.bins.iter().map(|b| b.weight).sum();
        if mass != 0.0 && (mass - 1.0).abs() > HISTOGRAM_MASS_TOLERANCE {
            return Err(Error::validation(format!(
                "histogram weights sum to {mass}, expected 1 or an all-zero histogram"
            )));
        }
        Ok(())
    }
}

// Histograms are sparse on disk: zero bins are dropped and restored on load.
#[derive(Serialize, Deserialize)]
struct SparseHistogram {
    id: u64,
    image_id: u64,
    index_id: u64,
    k: usize,
    bins: Vec<(u32, f64)>,
}

impl Serialize for HistogramRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SparseHistogram {
            id: self.id,
            image_id: self.image_id,
            index_id: self.index_id,
            k: self.bins.len(),
            bins: self
                .bins
                .iter()
                .filter(|b| b.weight != 0.0)
                .map(|b| (b.word_index, b.weight))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HistogramRecord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let sparse = SparseHistogram::deserialize(deserializer)?;
        let mut weights = vec![0.0; sparse.k];
        for (i, w) in sparse.bins {
            let slot = weights
                .get_mut(i as usize)
                .ok_or_else(|| serde::de::Error::custom(format!("bin {i} outside k = {}", sparse.k)))?;
            *slot = w;
        }
        let mut h = HistogramRecord::from_weights(sparse.image_id, sparse.index_id, &weights);
        h.id = sparse.id;
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_histogram_keeps_dense_shape() {
        let mut h = HistogramRecord::from_weights(3, 4, &[0.0, 0.25, 0.0, 0.75, 0.0]);
        h.id = 9;
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("\"bins\":[[1,0.25],[3,0.75]]"), "{json}");
        let back: HistogramRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn short_descriptor_is_rejected() {
        let ds = DescriptorSet {
            image_id: 1,
            descriptors: vec![vec![0.125; 63]],
            points: vec![KeyPoint {
                x: 1.0,
                y: 1.0,
                scale: 1.2,
                laplacian_sign: 1,
            }],
        };
        assert!(matches!(ds.validate(8, 8), Err(Error::Validation(_))));
    }

    #[test]
    fn histogram_mass_rules() {
        assert!(HistogramRecord::from_weights(1, 1, &[0.0; 4]).validate(4).is_ok());
        assert!(HistogramRecord::from_weights(1, 1, &[0.5, 0.5, 0.0, 0.0]).validate(4).is_ok());
        assert!(HistogramRecord::from_weights(1, 1, &[0.5, 0.4, 0.0, 0.0]).validate(4).is_err());
        assert!(HistogramRecord::from_weights(1, 1, &[1.0, 0.0]).validate(4).is_err());
    }

    #[test]
    fn index_params_bounds() {
        assert!(IndexParams::default().validate().is_ok());
        assert!(IndexParams { k: 1, ..Default::default() }.validate().is_err());
        assert!(IndexParams { max_iterations: 0, ..Default::default() }.validate().is_err());
        assert!(IndexParams { convergence_eps: 0.0, ..Default::default() }.validate().is_err());
    }
}
