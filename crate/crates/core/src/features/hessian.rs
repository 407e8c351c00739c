//! Box-filter approximation of the scale-normalized Hessian determinant.

use super::integral::{IntegralImage, Rect};

/// Hessian determinant response at `(x, y)` for a box filter of side
/// `filter_size` (9, 15, 21, ...), together with the sign of the Laplacian.
///
/// Each second-derivative estimate is divided by the filter area so that
/// responses are comparable across scales.
pub fn hessian_response(ii: &IntegralImage, x: i64, y: i64, filter_size: usize, dxy_weight: f64) -> (f64, i8) {
    let size = filter_size as i64;
    let border = (size - 1) / 2;
    let lobe = size / 3;
    let inv_area = 1.0 / (size * size) as f64;

    let dxx = ii.lobe(Rect::new(x - border, y - lobe + 1, size, 2 * lobe - 1))
        - 3.0 * ii.lobe(Rect::new(x - lobe / 2, y - lobe + 1, lobe, 2 * lobe - 1));
    let dyy = ii.lobe(Rect::new(x - lobe + 1, y - border, 2 * lobe - 1, size))
        - 3.0 * ii.lobe(Rect::new(x - lobe + 1, y - lobe / 2, 2 * lobe - 1, lobe));
    let dxy = ii.lobe(Rect::new(x + 1, y - lobe, lobe, lobe)) + ii.lobe(Rect::new(x - lobe, y + 1, lobe, lobe))
        - ii.lobe(Rect::new(x - lobe, y - lobe, lobe, lobe))
        - ii.lobe(Rect::new(x + 1, y + 1, lobe, lobe));

    let dxx = dxx * inv_area;
    let dyy = dyy * inv_area;
    let dxy = dxy * inv_area;
    let response = dxx * dyy - (dxy_weight * dxy).powi(2);
    let sign = if dxx + dyy >= 0.0 { 1 } else { -1 };
    (response, sign)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_image(w: usize, h: usize, cx: usize, cy: usize) -> IntegralImage {
        let mut px = vec![0.0; w * h];
        for y in cy - 1..=cy + 1 {
            for x in cx - 1..=cx + 1 {
                px[y * w + x] = 1.0;
            }
        }
        IntegralImage::from_values(w, h, &px).unwrap()
    }

    #[test]
    fn constant_image_has_no_response() {
        let ii = IntegralImage::from_values(20, 17, &vec![0.63; 20 * 17]).unwrap();
        for size in [9, 15, 21, 27] {
            for y in 0..17 {
                for x in 0..20 {
                    let (r, _) = hessian_response(&ii, x, y, size, 0.9);
                    assert!(r.abs() < 1e-12, "size {size} at ({x},{y}): {r}");
                }
            }
        }
    }

    #[test]
    fn blob_center_beats_background() {
        let ii = blob_image(40, 40, 20, 20);
        let (center, sign) = hessian_response(&ii, 20, 20, 9, 0.9);
        let (away, _) = hessian_response(&ii, 30, 20, 9, 0.9);
        assert!(center > away, "{center} vs {away}");
        // Bright blob: both second derivatives negative.
        assert_eq!(sign, -1);
        // Hand evaluation: Dxx = Dyy = (9 - 3 * 9) / 81, Dxy = 0.
        let d = -18.0 / 81.0;
        assert!((center - d * d).abs() < 1e-12);
    }
}
