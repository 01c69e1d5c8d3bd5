use image::RgbImage;

use crate::par;

/// Camera-dependent mixing weight for the red and blue log channels.
pub const DEFAULT_ALPHA: f64 = 0.4706;

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl IlluminationImage {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }
}

/// `log G - alpha log R - (1 - alpha) log B` on positive linear values.
#[inline]
pub fn invariant_value(r: f64, g: f64, b: f64, alpha: f64) -> f64 {
    g.ln() - alpha * r.ln() - (1.0 - alpha) * b.ln()
}

#[inline]
fn channel(c: u8) -> f64 {
    (c as f64 + 1.0) / 256.0
}

/// Maps 8-bit channels to `(c + 1) / 256` so the logarithm is always defined.
pub fn illumination_invariant(image: &RgbImage, alpha: f64) -> IlluminationImage {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let (w, h) = (image.width() as usize, image.height() as usize);
    let raw = image.as_raw();
    let values = par::map_range(w * h, |i| {
        let p = &raw[3 * i..3 * i + 3];
        invariant_value(channel(p[0]), channel(p[1]), channel(p[2]), alpha)
    });
    IlluminationImage {
        width: w,
        height: h,
        values,
        alpha,
    }
}

/// Same transform on linear-light RGB triples that are already positive.
pub fn illumination_invariant_linear(
    width: usize,
    height: usize,
    rgb: &[[f64; 3]],
    alpha: f64,
) -> IlluminationImage {
    assert_eq!(rgb.len(), width * height);
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let values = par::map_slice(rgb, |p| invariant_value(p[0], p[1], p[2], alpha));
    IlluminationImage {
        width,
        height,
        values,
        alpha,
    }
}
