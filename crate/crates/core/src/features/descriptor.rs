//! Upright 64-dimensional SURF descriptor.
//!
//! A square window of side `20 * scale` centred on the point is split into
//! 4x4 subregions of 5x5 samples each. At every sample Haar wavelet
//! responses of side `2 * scale` are weighted by a Gaussian (sigma =
//! `3.3 * scale`) centred on the point, and each subregion accumulates
//! `(sum dx, sum |dx|, sum dy, sum |dy|)`.

use crate::model::DESCRIPTOR_LEN;

use super::detector::InterestPoint;
use super::integral::{IntegralImage, Rect};

const SAMPLES: usize = 20;
const SUBREGION: usize = 5;
// Below this the accumulated responses are rounding noise from the table.
const FLAT_NORM: f64 = 1e-10;

/// Horizontal Haar response (right half minus left half) of a `size` square
/// centred on `(x, y)`.
pub fn haar_x(ii: &IntegralImage, x: i64, y: i64, size: i64) -> f64 {
    let half = size / 2;
    ii.lobe(Rect::new(x, y - half, half, size)) - ii.lobe(Rect::new(x - half, y - half, half, size))
}

/// Vertical Haar response (bottom half minus top half).
pub fn haar_y(ii: &IntegralImage, x: i64, y: i64, size: i64) -> f64 {
    let half = size / 2;
    ii.lobe(Rect::new(x - half, y, size, half)) - ii.lobe(Rect::new(x - half, y - half, size, half))
}

/// Computes the L2-normalized descriptor of `pt`. A window without any
/// gradient gives the zero vector.
pub fn compute_descriptor(ii: &IntegralImage, pt: &InterestPoint) -> Vec<f64> {
    let scale = pt.scale;
    let cx = pt.x.round();
    let cy = pt.y.round();
    let wavelet = (2.0 * scale.round()).max(2.0) as i64;
    let sigma = 3.3 * scale;
    let denom = 2.0 * sigma * sigma;

    let mut desc = vec![0.0; DESCRIPTOR_LEN];
    for v in 0..SAMPLES {
        let sy = (cy + (v as f64 - 9.5) * scale).round();
        for u in 0..SAMPLES {
            let sx = (cx + (u as f64 - 9.5) * scale).round();
            let weight = (-((sx - cx).powi(2) + (sy - cy).powi(2)) / denom).exp();
            let dx = weight * haar_x(ii, sx as i64, sy as i64, wavelet);
            let dy = weight * haar_y(ii, sx as i64, sy as i64, wavelet);
            let base = 4 * ((v / SUBREGION) * 4 + u / SUBREGION);
            desc[base] += dx;
            desc[base + 1] += dx.abs();
            desc[base + 2] += dy;
            desc[base + 3] += dy.abs();
        }
    }

    let norm = desc.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm > FLAT_NORM && norm.is_finite() {
        desc.iter_mut().for_each(|d| *d /= norm);
    } else {
        desc.iter_mut().for_each(|d| *d = 0.0);
    }
    desc
}
