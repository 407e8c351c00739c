//! Fast-Hessian interest point detection over an octave/interval pyramid.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::hessian::hessian_response;
use super::integral::IntegralImage;

/// Detector and descriptor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ExtractorParams {
    pub octaves: usize,
    pub intervals_per_octave: usize,
    /// Minimum Hessian response on `[0, 1]` intensities.
    pub hessian_threshold: f64,
    /// Grid step of the first octave, doubled every octave.
    pub initial_sampling_step: usize,
    /// Relative weight of the mixed derivative in the determinant.
    pub dxy_weight: f64,
}

impl Default for ExtractorParams {
    fn default() -> Self {
        Self {
            octaves: 3,
            intervals_per_octave: 4,
            hessian_threshold: 0.0004,
            initial_sampling_step: 2,
            dxy_weight: 0.9,
        }
    }
}

impl ExtractorParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 {
            return Err(Error::validation("octaves must be at least 1"));
        }
        // Non-maximum suppression needs a layer above and below.
        if self.intervals_per_octave < 3 {
            return Err(Error::validation("intervalsPerOctave must be at least 3"));
        }
        if !self.hessian_threshold.is_finite() || self.hessian_threshold < 0.0 {
            return Err(Error::validation("hessianThreshold must be a non-negative number"));
        }
        if self.initial_sampling_step < 1 {
            return Err(Error::validation("initialSamplingStep must be at least 1"));
        }
        if !(self.dxy_weight > 0.0 && self.dxy_weight <= 1.0) {
            return Err(Error::validation("dxyWeight must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterestPoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub response: f64,
    pub laplacian_sign: i8,
}

/// Side of the box filter for `interval` within `octave` (both zero-based):
/// 9, 15, 21, 27 in the first octave, 15, 27, 39, 51 in the second, ...
pub fn filter_size(octave: usize, interval: usize) -> usize {
    3 * ((1usize << (octave + 1)) * (interval + 1) + 1)
}

/// Gaussian scale equivalent to a box filter of side `size`.
pub fn filter_scale(size: usize) -> f64 {
    1.2 * size as f64 / 9.0
}

struct Layer {
    size: usize,
    responses: Vec<f64>,
    signs: Vec<i8>,
}

/// Detects scale-space maxima of the Hessian response.
///
/// A point is kept when its response exceeds the threshold and is strictly
/// greater than all 26 neighbours in the 3x3x3 block spanning the adjacent
/// intervals. Only positions where the largest filter of the octave fits
/// inside the image are considered. The output is sorted by descending
/// response, ties broken by position and scale.
pub fn detect_interest_points(ii: &IntegralImage, params: &ExtractorParams) -> Vec<InterestPoint> {
    let (width, height) = (ii.width(), ii.height());
    let mut points = Vec::new();

    for octave in 0..params.octaves {
        let step = params.initial_sampling_step << octave;
        let cols = width.div_ceil(step);
        let rows = height.div_ceil(step);
        let top = filter_size(octave, params.intervals_per_octave - 1);
        let border = (top - 1) / 2;
        if 2 * border + 1 > width.min(height) {
            break;
        }

        let layers: Vec<Layer> = (0..params.intervals_per_octave)
            .into_par_iter()
            .map(|interval| {
                let size = filter_size(octave, interval);
                let mut responses = vec![0.0; rows * cols];
                let mut signs = vec![1; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        let (resp, sign) = hessian_response(
                            ii,
                            (c * step) as i64,
                            (r * step) as i64,
                            size,
                            params.dxy_weight,
                        );
                        responses[r * cols + c] = resp;
                        signs[r * cols + c] = sign;
                    }
                }
                Layer { size, responses, signs }
            })
            .collect();

        let fits = |pos: usize, extent: usize| pos >= border && pos + border < extent;
        for i in 1..layers.len() - 1 {
            for r in 1..rows.saturating_sub(1) {
                if !fits(r * step, height) {
                    continue;
                }
                for c in 1..cols.saturating_sub(1) {
                    if !fits(c * step, width) {
                        continue;
                    }
                    let value = layers[i].responses[r * cols + c];
                    if value.is_nan() || value <= params.hessian_threshold {
                        continue;
                    }
                    if is_strict_maximum(&layers[i - 1..=i + 1], cols, r, c, value) {
                        points.push(InterestPoint {
                            x: (c * step) as f64,
                            y: (r * step) as f64,
                            scale: filter_scale(layers[i].size),
                            response: value,
                            laplacian_sign: layers[i].signs[r * cols + c],
                        });
                    }
                }
            }
        }
    }

    points.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });
    points
}

fn is_strict_maximum(stack: &[Layer], cols: usize, r: usize, c: usize, value: f64) -> bool {
    for (li, layer) in stack.iter().enumerate() {
        for rr in r - 1..=r + 1 {
            for cc in c - 1..=c + 1 {
                if li == 1 && rr == r && cc == c {
                    continue;
                }
                if layer.responses[rr * cols + cc].partial_cmp(&value) != Some(Ordering::Less) {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_sizes_follow_the_pyramid() {
        let first: Vec<_> = (0..4).map(|i| filter_size(0, i)).collect();
        let second: Vec<_> = (0..4).map(|i| filter_size(1, i)).collect();
        let third: Vec<_> = (0..4).map(|i| filter_size(2, i)).collect();
        assert_eq!(first, [9, 15, 21, 27]);
        assert_eq!(second, [15, 27, 39, 51]);
        assert_eq!(third, [27, 51, 75, 99]);
        assert!((filter_scale(9) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(ExtractorParams::default().validate().is_ok());
        let bad = [
            ExtractorParams { octaves: 0, ..Default::default() },
            ExtractorParams { intervals_per_octave: 2, ..Default::default() },
            ExtractorParams { hessian_threshold: -1.0, ..Default::default() },
            ExtractorParams { initial_sampling_step: 0, ..Default::default() },
            ExtractorParams { dxy_weight: 0.0, ..Default::default() },
            ExtractorParams { dxy_weight: 1.5, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn constant_image_yields_nothing() {
        let ii = IntegralImage::from_values(64, 64, &vec![0.4; 64 * 64]).unwrap();
        assert!(detect_interest_points(&ii, &ExtractorParams::default()).is_empty());
    }

    #[test]
    fn tiny_image_yields_nothing() {
        let ii = IntegralImage::from_values(8, 8, &[0.0, 1.0].repeat(32)).unwrap();
        assert!(detect_interest_points(&ii, &ExtractorParams::default()).is_empty());
    }

    #[test]
    fn finds_a_single_blob() {
        let (w, h) = (64, 64);
        let (cx, cy) = (32.0, 30.0);
        let px: Vec<f64> = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                0.1 + 0.8 * (-d2 / (2.0 * 2.5f64.powi(2))).exp()
            })
            .collect();
        let ii = IntegralImage::from_values(w, h, &px).unwrap();
        let pts = detect_interest_points(&ii, &ExtractorParams::default());
        assert!(!pts.is_empty());
        let nearest = pts
            .iter()
            .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= 3.0, "nearest detection {nearest} px away");
        assert!(pts.windows(2).all(|w| w[0].response >= w[1].response));
        assert_eq!(pts, detect_interest_points(&ii, &ExtractorParams::default()));
    }
}
