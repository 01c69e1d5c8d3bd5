//! Direction ray map.
//!
//! Points are binned by polar angle around the bottom-center pixel, each
//! beam casts a ray to its nearest obstacle (or its farthest point when the
//! beam is obstacle-free), and a sliding window minimum over beam lengths
//! trims rays that leak through gaps narrower than a vehicle.

use std::f64::consts::PI;

use crate::ingest::FusedPoint;
use crate::preprocess::SuperpixelMap;
use crate::raster::Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    pub bins: usize,
    /// `(floor(width / 2), height - 1)`.
    pub base: (f64, f64),
    pub width: usize,
    pub height: usize,
    /// Point indices per beam, nearest first; ties by index.
    pub beams: Vec<Vec<usize>>,
    /// Image distance of every point to the base (NaN for excluded points).
    pub dist: Vec<f64>,
}

pub fn base_point(width: usize, height: usize) -> (f64, f64) {
    ((width / 2) as f64, height as f64 - 1.0)
}

/// Polar angle of `(u, v)` around `base`, in `[0, pi]` with 0 pointing right
/// and `pi / 2` straight up. Points below the base row are clamped onto the
/// nearer horizontal direction.
pub fn polar_angle(base: (f64, f64), u: f64, v: f64) -> f64 {
    let theta = (base.1 - v).atan2(u - base.0);
    if theta >= 0.0 {
        theta
    } else if theta > -PI / 2.0 {
        0.0
    } else {
        PI
    }
}

pub fn bin_of(theta: f64, bins: usize) -> usize {
    ((theta / PI * bins as f64).floor() as usize).min(bins - 1)
}

pub fn bin_points_polar(
    points: &[FusedPoint],
    width: usize,
    height: usize,
    bins: usize,
) -> BeamSet {
    assert!(bins >= 1, "bin count must be at least 1");
    let base = base_point(width, height);
    let mut beams = vec![Vec::new(); bins];
    let mut dist = vec![f64::NAN; points.len()];
    for (i, p) in points.iter().enumerate() {
        let d = (p.u - base.0).hypot(p.v - base.1);
        if d == 0.0 {
            continue;
        }
        dist[i] = d;
        beams[bin_of(polar_angle(base, p.u, p.v), bins)].push(i);
    }
    for beam in &mut beams {
        beam.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    }
    BeamSet {
        bins,
        base,
        width,
        height,
        beams,
        dist,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    /// Index of the endpoint point.
    pub point: usize,
    pub raw_length: f64,
    /// Window-minimum length; equals `raw_length` before filtering.
    pub length: f64,
    /// False once the filter has dropped the ray.
    pub retained: bool,
    /// Full line from the base to the endpoint pixel, 8-connected.
    pub raw_pixels: Vec<(usize, usize)>,
    /// Drawn part of `raw_pixels`: a prefix, empty when not retained.
    pub pixels: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayMap {
    pub base: (f64, f64),
    pub width: usize,
    pub height: usize,
    pub rays: Vec<Option<Ray>>,
    pub mask: Mask,
}

impl RayMap {
    fn rasterize(width: usize, height: usize, rays: &[Option<Ray>]) -> Mask {
        let mut mask = Mask::filled(width, height, false);
        for r in rays.iter().flatten() {
            for &(u, v) in &r.pixels {
                mask.set(u, v, true);
            }
        }
        mask
    }

    /// Rays still drawn into the mask.
    pub fn ray_count(&self) -> usize {
        self.rays.iter().flatten().filter(|r| r.retained).count()
    }

    pub fn retained(&self, h: usize) -> Option<&Ray> {
        self.rays[h].as_ref().filter(|r| r.retained)
    }
}

/// Integer line from `a` to `b` inclusive.
pub fn line_pixels(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if x == b.0 && y == b.1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// One ray per non-empty beam: to the nearest obstacle point, or to the
/// farthest point if the beam has no obstacle.
pub fn generate_drm(beams: &BeamSet, points: &[FusedPoint], obstacle: &[bool]) -> RayMap {
    let (w, h) = (beams.width, beams.height);
    let base_px = (beams.base.0 as i64, beams.base.1 as i64);
    let rays: Vec<Option<Ray>> = beams
        .beams
        .iter()
        .map(|beam| {
            let end = beam
                .iter()
                .copied()
                .find(|&i| obstacle[i])
                .or_else(|| beam.last().copied())?;
            let p = &points[end];
            let (eu, ev) = p.pixel();
            let pixels: Vec<_> = line_pixels(base_px, (eu as i64, ev as i64))
                .into_iter()
                .filter(|&(u, v)| u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h)
                .map(|(u, v)| (u as usize, v as usize))
                .collect();
            Some(Ray {
                point: end,
                raw_length: beams.dist[end],
                length: beams.dist[end],
                retained: true,
                raw_pixels: pixels.clone(),
                pixels,
            })
        })
        .collect();
    let mask = RayMap::rasterize(w, h, &rays);
    RayMap {
        base: beams.base,
        width: w,
        height: h,
        rays,
        mask,
    }
}

/// Window-minimum filter over beams `[h - window, h + window]`, computed from
/// raw lengths so repeated application is a no-op. Rays shorter than
/// `min_length` afterwards stop being drawn; survivors keep the prefix of
/// their raw pixel run that lies within the filtered length.
pub fn filter_rays(raymap: &RayMap, window: usize, min_length: f64) -> RayMap {
    let n = raymap.rays.len();
    let base = raymap.base;
    let rays: Vec<Option<Ray>> = (0..n)
        .map(|h| {
            let ray = raymap.rays[h].as_ref()?;
            let lo = h.saturating_sub(window);
            let hi = (h + window).min(n - 1);
            let len = raymap.rays[lo..=hi]
                .iter()
                .flatten()
                .map(|r| r.raw_length)
                .fold(f64::INFINITY, f64::min);
            let retained = len >= min_length;
            let pixels = if !retained {
                Vec::new()
            } else if len >= ray.raw_length {
                ray.raw_pixels.clone()
            } else {
                ray.raw_pixels
                    .iter()
                    .copied()
                    .take_while(|&(u, v)| (u as f64 - base.0).hypot(v as f64 - base.1) <= len)
                    .collect()
            };
            Some(Ray {
                point: ray.point,
                raw_length: ray.raw_length,
                length: len,
                retained,
                raw_pixels: ray.raw_pixels.clone(),
                pixels,
            })
        })
        .collect();
    let mask = RayMap::rasterize(raymap.width, raymap.height, &rays);
    RayMap {
        base,
        width: raymap.width,
        height: raymap.height,
        rays,
        mask,
    }
}

/// Superpixels touched by the ray mask, and every superpixel's member points.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialArea {
    /// Sorted superpixel ids.
    pub seeds: Vec<usize>,
    pub in_seed: Vec<bool>,
    /// Point indices whose pixel lies in each superpixel.
    pub members: Vec<Vec<usize>>,
}

impl InitialArea {
    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

pub fn initial_area(raymap: &RayMap, sp: &SuperpixelMap, points: &[FusedPoint]) -> InitialArea {
    let mut in_seed = vec![false; sp.len()];
    for (i, &m) in raymap.mask.data.iter().enumerate() {
        if m {
            in_seed[sp.labels[i] as usize] = true;
        }
    }
    let seeds = (0..sp.len()).filter(|&s| in_seed[s]).collect();
    let mut members = vec![Vec::new(); sp.len()];
    for (i, p) in points.iter().enumerate() {
        let (u, v) = p.pixel();
        members[sp.label_at(u, v)].push(i);
    }
    InitialArea {
        seeds,
        in_seed,
        members,
    }
}

/// Points on retained beams no farther from the base than the filtered length.
pub fn ray_points(beams: &BeamSet, filtered: &RayMap) -> Vec<bool> {
    let mut on_ray = vec![false; beams.dist.len()];
    for (h, beam) in beams.beams.iter().enumerate() {
        if let Some(ray) = filtered.retained(h) {
            for &i in beam {
                if beams.dist[i] <= ray.length {
                    on_ray[i] = true;
                } else {
                    break;
                }
            }
        }
    }
    on_ray
}
