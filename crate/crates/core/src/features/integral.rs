use crate::error::{Error, Result};

use super::gray::GrayImage;

/// Axis-aligned integer rectangle; may extend past the image, in which case
/// it is clamped to the image bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

impl Rect {
    pub const fn new(x: i64, y: i64, width: i64, height: i64) -> Self {
        Self { x, y, width, height }
    }
}

/// Summed-area table: `at(x, y)` is the sum of all pixels in `(0,0)..=(x,y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    pub fn new(image: &GrayImage) -> Self {
        Self::build(image.width(), image.height(), image.pixels())
    }

    /// Builds a table over arbitrary finite intensities (not restricted to `[0, 1]`).
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::validation(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("intensities must be finite"));
        }
        Ok(Self::build(width, height, values))
    }

    fn build(width: usize, height: usize, values: &[f64]) -> Self {
        let mut table = vec![0.0; width * height];
        for y in 0..height {
            let mut row_sum = 0.0;
            for x in 0..width {
                row_sum += values[y * width + x];
                let above = if y > 0 { table[(y - 1) * width + x] } else { 0.0 };
                table[y * width + x] = row_sum + above;
            }
        }
        Self { width, height, table }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.table[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.at(self.width - 1, self.height - 1)
    }

    // Table lookup with the convention that row/column -1 is zero.
    fn lookup(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 {
            0.0
        } else {
            self.table[y as usize * self.width + x as usize]
        }
    }

    /// Clamped bounds `(x0, y0, x1, y1)` (inclusive), or `None` when nothing is left.
    fn clamp(&self, r: Rect) -> Option<(i64, i64, i64, i64)> {
        let x0 = r.x.max(0);
        let y0 = r.y.max(0);
        let x1 = r.x.saturating_add(r.width).min(self.width as i64) - 1;
        let y1 = r.y.saturating_add(r.height).min(self.height as i64) - 1;
        (x0 <= x1 && y0 <= y1).then_some((x0, y0, x1, y1))
    }

    /// Sum of the pixels inside `rect` after clamping it to the image.
    /// A rectangle entirely outside the image sums to 0.
    pub fn box_sum(&self, rect: Rect) -> f64 {
        match self.clamp(rect) {
            Some((x0, y0, x1, y1)) => {
                self.lookup(x1, y1) - self.lookup(x0 - 1, y1) - self.lookup(x1, y0 - 1)
                    + self.lookup(x0 - 1, y0 - 1)
            }
            None => 0.0,
        }
    }

    /// Mean intensity of `rect` clamped to the image, scaled back to the
    /// nominal area of `rect`. Equal to [`box_sum`](Self::box_sum) wherever
    /// `rect` lies inside the image. A rectangle hanging over the border uses
    /// the part inside, one entirely outside uses the nearest edge strip, so
    /// box-filter derivatives stay zero on flat regions.
    pub(crate) fn lobe(&self, rect: Rect) -> f64 {
        if rect.width <= 0 || rect.height <= 0 {
            return 0.0;
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let x0 = rect.x.clamp(0, w - 1);
        let y0 = rect.y.clamp(0, h - 1);
        let x1 = (rect.x + rect.width - 1).clamp(0, w - 1);
        let y1 = (rect.y + rect.height - 1).clamp(0, h - 1);
        let sum = self.lookup(x1, y1) - self.lookup(x0 - 1, y1) - self.lookup(x1, y0 - 1)
            + self.lookup(x0 - 1, y0 - 1);
        let clamped = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
        let nominal = (rect.width * rect.height) as f64;
        if clamped == nominal {
            sum
        } else {
            sum / clamped * nominal
        }
    }
}
