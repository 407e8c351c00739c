use image::DynamicImage;

use crate::error::{Error, Result};

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation("gray image must be at least 1x1"));
        }
        if pixels.len() != width * height {
            return Err(Error::validation(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::validation("gray pixels must be finite and within [0, 1]"));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Decodes PNG or JPEG bytes.
pub fn decode_image(bytes: &[u8]) -> Result<DynamicImage> {
    if bytes.is_empty() {
        return Err(Error::Decode("empty image payload".into()));
    }
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Decode("image has no pixels".into()));
    }
    Ok(img)
}

/// ITU-R 601 luma of an 8-bit RGB triple, scaled to `[0, 1]`.
pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    let y = (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0;
    y.clamp(0.0, 1.0)
}

/// Converts a decoded raster to grayscale. Alpha is ignored.
pub fn to_grayscale(img: &DynamicImage) -> GrayImage {
    let rgba = img.to_rgba8();
    let pixels = rgba.pixels().map(|p| luminance(p[0], p[1], p[2])).collect();
    GrayImage {
        width: rgba.width() as usize,
        height: rgba.height() as usize,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageFormat, Rgba, RgbaImage};

    #[test]
    fn luminance_of_primaries() {
        assert!((luminance(255, 255, 255) - 1.0).abs() < 1e-12);
        assert_eq!(luminance(0, 0, 0), 0.0);
        assert!((luminance(255, 0, 0) - 0.299).abs() < 1e-12);
    }

    #[test]
    fn alpha_is_ignored() {
        let mut img = RgbaImage::new(2, 1);
        img.put_pixel(0, 0, Rgba([0, 255, 0, 0]));
        img.put_pixel(1, 0, Rgba([0, 255, 0, 255]));
        let g = to_grayscale(&DynamicImage::ImageRgba8(img));
        assert_eq!(g.get(0, 0), g.get(1, 0));
        assert!((g.get(0, 0) - 0.587).abs() < 1e-12);
    }

    #[test]
    fn decode_round_trip_and_garbage() {
        let img = RgbaImage::from_pixel(3, 2, Rgba([10, 20, 30, 255]));
        let mut png = Vec::new();
        DynamicImage::ImageRgba8(img)
            .write_to(&mut std::io::Cursor::new(&mut png), ImageFormat::Png)
            .unwrap();
        let back = decode_image(&png).unwrap();
        assert_eq!((back.width(), back.height()), (3, 2));
        assert!(matches!(decode_image(b"not an image"), Err(Error::Decode(_))));
        assert!(matches!(decode_image(&[]), Err(Error::Decode(_))));
    }

    #[test]
    fn gray_image_rejects_out_of_range() {
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.5]).is_err());
        assert!(GrayImage::new(1, 1, vec![0.5]).is_ok());
    }
}
