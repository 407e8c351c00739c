//! SURF feature extraction: grayscale conversion, integral image, Fast-Hessian
//! detection and upright 64-d descriptors.

mod descriptor;
mod detector;
mod gray;
mod hessian;
mod integral;

pub use self::descriptor::{compute_descriptor, haar_x, haar_y};
pub use self::detector::{detect_interest_points, filter_scale, filter_size, ExtractorParams, InterestPoint};
pub use self::gray::{decode_image, luminance, to_grayscale, GrayImage};
pub use self::hessian::hessian_response;
pub use self::integral::{IntegralImage, Rect};

use crate::error::Result;
use crate::model::{DescriptorSet, KeyPoint};

/// Local features of one decoded image.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub width: u32,
    pub height: u32,
    pub descriptors: Vec<Vec<f64>>,
    pub points: Vec<KeyPoint>,
}

impl Features {
    pub fn into_descriptor_set(self, image_id: u64) -> DescriptorSet {
        DescriptorSet {
            image_id,
            descriptors: self.descriptors,
            points: self.points,
        }
    }
}

/// Turns encoded image bytes into local descriptors.
pub trait FeatureExtractor: Send + Sync {
    fn extract_features(&self, image_bytes: &[u8]) -> Result<Features>;
}

/// Upright SURF extractor.
#[derive(Debug, Clone, Default)]
pub struct SurfExtractor {
    params: ExtractorParams,
}

impl SurfExtractor {
    pub fn new(params: ExtractorParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &ExtractorParams {
        &self.params
    }

    /// Detects and describes points on an already decoded image.
    pub fn extract_gray(&self, gray: &GrayImage) -> Features {
        let ii = IntegralImage::new(gray);
        self.extract_integral(&ii)
    }

    pub fn extract_integral(&self, ii: &IntegralImage) -> Features {
        let mut descriptors = Vec::new();
        let mut points = Vec::new();
        for pt in detect_interest_points(ii, &self.params) {
            let d = compute_descriptor(ii, &pt);
            // Zero descriptors carry no information and cannot be normalized.
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            descriptors.push(d);
            points.push(KeyPoint {
                x: pt.x,
                y: pt.y,
                scale: pt.scale,
                laplacian_sign: pt.laplacian_sign,
            });
        }
        Features {
            width: ii.width() as u32,
            height: ii.height() as u32,
            descriptors,
            points,
        }
    }
}

impl FeatureExtractor for SurfExtractor {
    fn extract_features(&self, image_bytes: &[u8]) -> Result<Features> {
        let img = decode_image(image_bytes)?;
        Ok(self.extract_gray(&to_grayscale(&img)))
    }
}
