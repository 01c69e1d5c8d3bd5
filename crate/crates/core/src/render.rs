//! Output and debug images.

use image::{ImageBuffer, Luma, Rgb, RgbImage};

use crate::preprocess::SuperpixelMap;
use crate::raster::{Mask, ProbabilityMap};
use crate::raymap::RayMap;

pub type Gray16 = ImageBuffer<Luma<u16>, Vec<u16>>;
pub type Gray8 = ImageBuffer<Luma<u8>, Vec<u8>>;

/// `round(65535 * p)` per pixel.
pub fn probability_png(prob: &ProbabilityMap) -> Gray16 {
    let data = prob
        .data
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    Gray16::from_raw(prob.width as u32, prob.height as u32, data).expect("buffer size")
}

/// Inverse of [`probability_png`] up to quantization.
pub fn probability_from_png(img: &Gray16) -> ProbabilityMap {
    ProbabilityMap::from_vec(
        img.width() as usize,
        img.height() as usize,
        img.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
    )
}

/// 255 for set pixels.
pub fn mask_png(mask: &Mask) -> Gray8 {
    let data = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    Gray8::from_raw(mask.width as u32, mask.height as u32, data).expect("buffer size")
}

/// Mask blended green over the image, filtered rays drawn in red.
pub fn overlay(image: &RgbImage, mask: &Mask, rays: Option<&RayMap>) -> RgbImage {
    let mut out = image.clone();
    for (u, v, px) in out.enumerate_pixels_mut() {
        if *mask.get(u as usize, v as usize) {
            let Rgb([r, g, b]) = *px;
            *px = Rgb([
                (r as u16 / 2) as u8,
                ((g as u16 + 255) / 2) as u8,
                (b as u16 / 2) as u8,
            ]);
        }
    }
    if let Some(rays) = rays {
        for (u, v, px) in out.enumerate_pixels_mut() {
            if *rays.mask.get(u as usize, v as usize) {
                *px = Rgb([255, 0, 0]);
            }
        }
    }
    out
}

/// White rays on black.
pub fn ray_png(rays: &RayMap) -> Gray8 {
    mask_png(&rays.mask)
}

/// Segment boundaries drawn in yellow.
pub fn boundaries(image: &RgbImage, sp: &SuperpixelMap) -> RgbImage {
    let mut out = image.clone();
    let (w, h) = (sp.width, sp.height);
    for v in 0..h {
        for u in 0..w {
            let l = sp.label_at(u, v);
            let edge = (u + 1 < w && sp.label_at(u + 1, v) != l)
                || (v + 1 < h && sp.label_at(u, v + 1) != l);
            if edge {
                out.put_pixel(u as u32, v as u32, Rgb([255, 230, 0]));
            }
        }
    }
    out
}
