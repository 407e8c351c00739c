//! Generated texture corpus for tests, demos and benchmarks.
//!
//! Three classes of 96×96 grayscale PNGs on a noisy dark background:
//! round spots (`dots`), horizontal dashes (`hbars`) and vertical dashes
//! (`vbars`). Files are named `"<class> (<n>).png"`, so both directory and
//! file-name-prefix labelling recover the class.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const SIDE: u32 = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Texture {
    Dots,
    HorizontalBars,
    VerticalBars,
}

impl Texture {
    pub const ALL: [Texture; 3] = [Texture::Dots, Texture::HorizontalBars, Texture::VerticalBars];

    pub fn label(self) -> &'static str {
        match self {
            Texture::Dots => "dots",
            Texture::HorizontalBars => "hbars",
            Texture::VerticalBars => "vbars",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub name: String,
    pub class_label: String,
    pub bytes: Vec<u8>,
}

/// Renders one image of the given texture as grayscale values in [0, 1].
pub fn render(texture: Texture, rng: &mut impl Rng) -> Vec<f64> {
    let side = SIDE as usize;
    let background = rng.random_range(0.15..0.3);
    let mut px: Vec<f64> = (0..side * side)
        .map(|_| background + rng.random_range(-0.03..0.03))
        .collect();
    let count = rng.random_range(10..16);
    for _ in 0..count {
        let cx = rng.random_range(10.0..side as f64 - 10.0);
        let cy = rng.random_range(10.0..side as f64 - 10.0);
        let level = rng.random_range(0.75..0.95);
        let (rx, ry) = match texture {
            Texture::Dots => (2.5, 2.5),
            Texture::HorizontalBars => (7.0, 1.8),
            Texture::VerticalBars => (1.8, 7.0),
        };
        let (x0, x1) = ((cx - rx - 3.0).max(0.0) as usize, ((cx + rx + 3.0) as usize).min(side - 1));
        let (y0, y1) = ((cy - ry - 3.0).max(0.0) as usize, ((cy + ry + 3.0) as usize).min(side - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                let weight = (-(dx * dx + dy * dy).powi(2)).exp();
                let p = &mut px[y * side + x];
                *p = p.max(background + weight * (level - background));
            }
        }
    }
    for p in &mut px {
        *p = p.clamp(0.0, 1.0);
    }
    px
}

/// PNG encoding of grayscale values in [0, 1].
pub fn encode_png(width: u32, height: u32, pixels: &[f64]) -> Result<Vec<u8>> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        width,
        height,
        pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect(),
    )
    .ok_or_else(|| Error::validation("pixel count does not match dimensions"))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Storage(format!("png encoding failed: {e}")))?;
    Ok(out.into_inner())
}

/// `per_class` images of each texture, classes in [`Texture::ALL`] order.
pub fn corpus(per_class: usize, seed: u64) -> Vec<SyntheticImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * Texture::ALL.len());
    for texture in Texture::ALL {
        for n in 1..=per_class {
            let px = render(texture, &mut rng);
            out.push(SyntheticImage {
                name: format!("{} ({n}).png", texture.label()),
                class_label: texture.label().to_string(),
                bytes: encode_png(SIDE, SIDE, &px).expect("dimensions match"),
            });
        }
    }
    out
}

/// Writes the corpus as `<dir>/<class>/<class> (<n>).png`.
pub fn write_corpus(dir: &Path, per_class: usize, seed: u64) -> Result<Vec<SyntheticImage>> {
    let images = corpus(per_class, seed);
    for img in &images {
        let class_dir = dir.join(&img.class_label);
        std::fs::create_dir_all(&class_dir)?;
        std::fs::write(class_dir.join(&img.name), &img.bytes)?;
    }
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::decode_image;

    #[test]
    fn corpus_is_seeded() {
        let a = corpus(2, 4);
        assert_eq!(a, corpus(2, 4));
        assert_ne!(a, corpus(2, 5));
        assert_eq!(a.len(), 6);
        assert_eq!(a[2].name, "hbars (1).png");
    }

    #[test]
    fn images_decode_at_full_size() {
        for img in corpus(1, 0) {
            let d = decode_image(&img.bytes).unwrap();
            assert_eq!((d.width(), d.height()), (SIDE, SIDE));
        }
    }
}
