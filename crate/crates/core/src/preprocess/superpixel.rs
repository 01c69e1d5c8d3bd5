//! SLIC superpixels: grid-seeded k-means in (L, a, b, x, y) with a local
//! search window, followed by a connectivity pass that absorbs small
//! fragments into a neighbour.

use image::RgbImage;

use crate::error::{Error, Result};
use crate::par;

const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    /// Target number of segments.
    pub k: usize,
    /// Weight of the spatial term relative to color.
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            k: 1000,
            compactness: 10.0,
            iterations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Row-major pixel indices.
    pub pixels: Vec<u32>,
    /// Mean of pixel centers, `(u + 0.5, v + 0.5)`.
    pub centroid: (f64, f64),
}

impl Segment {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    pub width: usize,
    pub height: usize,
    /// Dense ids `0..len()`.
    pub labels: Vec<u32>,
    pub segments: Vec<Segment>,
    /// Sorted neighbour ids sharing a 4-connected boundary.
    pub adjacency: Vec<Vec<usize>>,
}

impl SuperpixelMap {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    #[inline]
    pub fn label_at(&self, u: usize, v: usize) -> usize {
        self.labels[v * self.width + u] as usize
    }

    /// Builds the map from any dense label image.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Self {
        assert_eq!(labels.len(), width * height);
        let n = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut pixels = vec![Vec::new(); n];
        let mut sums = vec![(0.0f64, 0.0f64); n];
        for (i, &l) in labels.iter().enumerate() {
            let l = l as usize;
            pixels[l].push(i as u32);
            sums[l].0 += (i % width) as f64 + 0.5;
            sums[l].1 += (i / width) as f64 + 0.5;
        }
        let segments = pixels
            .into_iter()
            .zip(sums)
            .map(|(px, (su, sv))| {
                let a = px.len().max(1) as f64;
                Segment {
                    centroid: (su / a, sv / a),
                    pixels: px,
                }
            })
            .collect();

        let mut adjacency = vec![Vec::new(); n];
        for v in 0..height {
            for u in 0..width {
                let l = labels[v * width + u] as usize;
                if u + 1 < width {
                    let r = labels[v * width + u + 1] as usize;
                    if r != l {
                        adjacency[l].push(r);
                        adjacency[r].push(l);
                    }
                }
                if v + 1 < height {
                    let d = labels[(v + 1) * width + u] as usize;
                    if d != l {
                        adjacency[l].push(d);
                        adjacency[d].push(l);
                    }
                }
            }
        }
        for a in &mut adjacency {
            a.sort_unstable();
            a.dedup();
        }
        Self {
            width,
            height,
            labels,
            segments,
            adjacency,
        }
    }
}

fn srgb_to_lab(c: [u8; 3]) -> [f32; 3] {
    fn lin(c: u8) -> f64 {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    fn f(t: f64) -> f64 {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    }
    let (r, g, b) = (lin(c[0]), lin(c[1]), lin(c[2]));
    let x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = (0.0193339 * r + 0.119_192 * g + 0.9503041 * b) / 1.08883;
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [
        (116.0 * fy - 16.0) as f32,
        (500.0 * (fx - fy)) as f32,
        (200.0 * (fy - fz)) as f32,
    ]
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

struct Grid {
    cols: usize,
    rows: usize,
    sx: f64,
    sy: f64,
}

impl Grid {
    fn new(width: usize, height: usize, k: usize) -> Self {
        let aspect = width as f64 / height as f64;
        let cols = ((k as f64 * aspect).sqrt().round() as usize).clamp(1, k.min(width));
        let rows = ((k as f64 / cols as f64).round() as usize).clamp(1, height);
        Self {
            cols,
            rows,
            sx: width as f64 / cols as f64,
            sy: height as f64 / rows as f64,
        }
    }

    fn cell(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x / self.sx).floor().max(0.0) as usize).min(self.cols - 1);
        let cy = ((y / self.sy).floor().max(0.0) as usize).min(self.rows - 1);
        (cx, cy)
    }
}

/// Segments `image` into roughly `params.k` superpixels.
///
/// Deterministic for a given input: cluster statistics are reduced per row in
/// a fixed order regardless of the parallel backend.
pub fn segment_superpixels(image: &RgbImage, params: &SlicParams) -> Result<SuperpixelMap> {
    let (width, height) = (image.width() as usize, image.height() as usize);
    let n = width * height;
    if n == 0 {
        return Err(Error::param("image is empty"));
    }
    if params.k == 0 {
        return Err(Error::param("superpixel count k must be at least 1"));
    }
    if params.k > n {
        return Err(Error::param(format!(
            "superpixel count k = {} exceeds pixel count {n}",
            params.k
        )));
    }
    if params.compactness.is_nan() || params.compactness <= 0.0 {
        return Err(Error::param("compactness must be positive"));
    }

    let raw = image.as_raw();
    let lab: Vec<[f32; 3]> = par::map_range(n, |i| {
        srgb_to_lab([raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]])
    });

    let grid = Grid::new(width, height, params.k);
    let mut centers: Vec<Center> = Vec::with_capacity(grid.cols * grid.rows);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let x = (c as f64 + 0.5) * grid.sx;
            let y = (r as f64 + 0.5) * grid.sy;
            let px = (x as usize).min(width - 1);
            let py = (y as usize).min(height - 1);
            let l = lab[py * width + px];
            centers.push(Center {
                lab: [l[0] as f64, l[1] as f64, l[2] as f64],
                x,
                y,
            });
        }
    }

    let step = (grid.sx * grid.sy).sqrt();
    let spatial_w = (params.compactness / step).powi(2);
    let mut labels = vec![UNLABELED; n];

    for _ in 0..params.iterations.max(1) {
        // Bucket centers by grid cell of their current position.
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); grid.cols * grid.rows];
        for (ci, c) in centers.iter().enumerate() {
            let (gx, gy) = grid.cell(c.x, c.y);
            buckets[gy * grid.cols + gx].push(ci as u32);
        }

        // Assignment: each pixel picks the nearest center whose 2S window
        // contains it.
        par::for_each_chunk_mut(&mut labels, width, |v, row| {
            let py = v as f64 + 0.5;
            for (u, out) in row.iter_mut().enumerate() {
                let px = u as f64 + 0.5;
                let (gx, gy) = grid.cell(px, py);
                let p = lab[v * width + u];
                let mut best = f64::INFINITY;
                let mut best_id = UNLABELED;
                for by in gy.saturating_sub(1)..=(gy + 1).min(grid.rows - 1) {
                    for bx in gx.saturating_sub(1)..=(gx + 1).min(grid.cols - 1) {
                        for &ci in &buckets[by * grid.cols + bx] {
                            let c = &centers[ci as usize];
                            let dx = px - c.x;
                            let dy = py - c.y;
                            if dx.abs() > grid.sx || dy.abs() > grid.sy {
                                continue;
                            }
                            let dl = p[0] as f64 - c.lab[0];
                            let da = p[1] as f64 - c.lab[1];
                            let db = p[2] as f64 - c.lab[2];
                            let d = dl * dl + da * da + db * db + spatial_w * (dx * dx + dy * dy);
                            if d < best || (d == best && ci < best_id) {
                                best = d;
                                best_id = ci;
                            }
                        }
                    }
                }
                *out = best_id;
            }
        });

        // Update: per-row partial sums, folded in row order.
        let k = centers.len();
        let partial: Vec<Vec<(u32, [f64; 6])>> = par::map_range(height, |v| {
            let mut acc: Vec<(u32, [f64; 6])> = Vec::new();
            let row = &labels[v * width..(v + 1) * width];
            let mut u = 0;
            while u < width {
                let l = row[u];
                let mut s = [0.0; 6];
                let start = u;
                while u < width && row[u] == l {
                    let p = lab[v * width + u];
                    s[0] += p[0] as f64;
                    s[1] += p[1] as f64;
                    s[2] += p[2] as f64;
                    s[3] += u as f64 + 0.5;
                    u += 1;
                }
                let cnt = (u - start) as f64;
                s[4] += cnt * (v as f64 + 0.5);
                s[5] += cnt;
                if l != UNLABELED {
                    acc.push((l, s));
                }
            }
            acc
        });
        let mut sums = vec![[0.0f64; 6]; k];
        for row in &partial {
            for (l, s) in row {
                let t = &mut sums[*l as usize];
                for j in 0..6 {
                    t[j] += s[j];
                }
            }
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                c.lab = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
                c.x = s[3] / s[5];
                c.y = s[4] / s[5];
            }
        }
    }

    let min_size = (n / centers.len().max(1) / 4).max(1);
    let labels = enforce_connectivity(&labels, width, height, min_size);
    Ok(SuperpixelMap::from_labels(width, height, labels))
}

/// Relabels 4-connected components densely in raster order; components no
/// larger than `min_size` take the label of a previously visited neighbour.
fn enforce_connectivity(labels: &[u32], width: usize, height: usize, min_size: usize) -> Vec<u32> {
    let n = width * height;
    let mut out = vec![UNLABELED; n];
    let mut next = 0u32;
    let mut stack = Vec::new();
    let mut comp = Vec::new();
    for start in 0..n {
        if out[start] != UNLABELED {
            continue;
        }
        let (su, sv) = (start % width, start / width);
        let mut adjacent = None;
        for (du, dv) in [(-1i64, 0i64), (0, -1), (1, 0), (0, 1)] {
            let (nu, nv) = (su as i64 + du, sv as i64 + dv);
            if nu >= 0 && nv >= 0 && (nu as usize) < width && (nv as usize) < height {
                let j = nv as usize * width + nu as usize;
                if out[j] != UNLABELED {
                    adjacent = Some(out[j]);
                    break;
                }
            }
        }

        let orig = labels[start];
        comp.clear();
        stack.push(start);
        out[start] = next;
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (u, v) = (i % width, i / width);
            let mut visit = |j: usize| {
                if out[j] == UNLABELED && labels[j] == orig {
                    out[j] = next;
                    stack.push(j);
                }
            };
            if u > 0 {
                visit(i - 1);
            }
            if u + 1 < width {
                visit(i + 1);
            }
            if v > 0 {
                visit(i - width);
            }
            if v + 1 < height {
                visit(i + width);
            }
        }

        match adjacent {
            Some(a) if comp.len() <= min_size => {
                for &i in &comp {
                    out[i] = a;
                }
            }
            _ => next += 1,
        }
    }
    out
}
