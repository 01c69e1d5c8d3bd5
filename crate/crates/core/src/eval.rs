//! Pixel-wise road metrics over a threshold sweep.

use std::fmt;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::raster::{Mask, ProbabilityMap};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub road: Mask,
    /// Pixels outside `valid` are ignored.
    pub valid: Mask,
}

impl GroundTruth {
    /// Every pixel valid.
    pub fn from_road(road: Mask) -> Self {
        let valid = Mask::filled(road.width, road.height, true);
        Self { road, valid }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.road.dims()
    }
}

/// KITTI road encoding: red marks evaluated pixels, red plus blue marks road.
pub fn decode_kitti_gt(png: &RgbImage) -> GroundTruth {
    let (w, h) = (png.width() as usize, png.height() as usize);
    let mut road = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for p in png.pixels() {
        let v = p[0] > 0;
        valid.push(v);
        road.push(v && p[2] > 0);
    }
    GroundTruth {
        road: Mask::from_vec(w, h, road),
        valid: Mask::from_vec(w, h, valid),
    }
}

pub fn encode_kitti_gt(gt: &GroundTruth) -> RgbImage {
    let (w, h) = gt.dims();
    RgbImage::from_fn(w as u32, h as u32, |u, v| {
        let (u, v) = (u as usize, v as usize);
        match (*gt.valid.get(u, v), *gt.road.get(u, v)) {
            (true, true) => image::Rgb([255, 0, 255]),
            (true, false) => image::Rgb([255, 0, 0]),
            _ => image::Rgb([0, 0, 0]),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn fpr(&self) -> f64 {
        let d = self.fp + self.tn;
        if d == 0 {
            0.0
        } else {
            self.fp as f64 / d as f64
        }
    }

    /// Harmonic mean of precision and recall, 0 when undefined.
    pub fn f_measure(&self) -> f64 {
        match (self.precision(), self.recall()) {
            (Some(p), Some(r)) if p + r > 0.0 => 2.0 * p * r / (p + r),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub max_f: f64,
    pub ap: f64,
    pub pre: f64,
    pub rec: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub best_threshold: f64,
    /// Counts at `best_threshold`.
    pub counts: Counts,
}

pub const CSV_HEADER: &str = "MaxF,AP,PRE,REC,FPR,FNR";

impl Metrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.max_f, self.ap, self.pre, self.rec, self.fpr, self.fnr
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}\n", self.csv_row())
    }
}

impl fmt::Display for Metrics {
    /// Percent table in the usual benchmark column order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8} | {:>8} | {:>8} | {:>8} | {:>8} | {:>8}",
            "MaxF", "AP", "PRE", "REC", "FPR", "FNR"
        )?;
        writeln!(f, "{}", "-".repeat(8 * 6 + 5 * 3))?;
        write!(
            f,
            "{:>8.2} | {:>8.2} | {:>8.2} | {:>8.2} | {:>8.2} | {:>8.2}",
            100.0 * self.max_f,
            100.0 * self.ap,
            100.0 * self.pre,
            100.0 * self.rec,
            100.0 * self.fpr,
            100.0 * self.fnr
        )
    }
}

/// Valid `(probability, is_road)` samples of one or more frames.
#[derive(Debug, Clone, Default)]
pub struct SamplePool {
    samples: Vec<(f64, bool)>,
}

impl SamplePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, prob: &ProbabilityMap, gt: &GroundTruth) -> Result<()> {
        if prob.dims() != gt.dims() || gt.valid.dims() != gt.road.dims() {
            return Err(Error::DimensionMismatch {
                expected: gt.dims(),
                actual: prob.dims(),
            });
        }
        self.samples.extend(
            prob.data
                .iter()
                .zip(&gt.road.data)
                .zip(&gt.valid.data)
                .filter(|(_, &valid)| valid)
                .map(|((&p, &r), _)| (p, r)),
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sweeps `p >= t` over every distinct probability plus 0 and 1.
    pub fn metrics(&self) -> Result<Metrics> {
        if self.samples.is_empty() {
            return Err(Error::NoValidPixels);
        }
        let positives = self.samples.iter().filter(|s| s.1).count() as u64;
        if positives == 0 {
            return Err(Error::NoPositiveGroundTruth);
        }
        let negatives = self.samples.len() as u64 - positives;

        let mut sorted = self.samples.clone();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

        // Operating points from the highest threshold down: counts of
        // predictions with p >= t.
        let mut thresholds: Vec<f64> = Vec::new();
        let mut points: Vec<Counts> = Vec::new();
        let at = |tp: u64, fp: u64| Counts {
            tp,
            fp,
            fn_: positives - tp,
            tn: negatives - fp,
        };
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut i = 0;
        if sorted[0].0 < 1.0 {
            thresholds.push(1.0);
            points.push(at(0, 0));
        }
        while i < sorted.len() {
            let t = sorted[i].0;
            while i < sorted.len() && sorted[i].0 == t {
                if sorted[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            thresholds.push(t);
            points.push(at(tp, fp));
        }
        if *thresholds.last().unwrap() > 0.0 {
            thresholds.push(0.0);
            points.push(at(tp, fp));
        }
        thresholds.reverse();
        points.reverse();

        // Best F; ties go to the lowest threshold.
        let mut best = 0;
        let mut best_f = points[0].f_measure();
        for (k, c) in points.iter().enumerate().skip(1) {
            let f = c.f_measure();
            if f > best_f {
                best_f = f;
                best = k;
            }
        }

        let ap = (0..=10)
            .map(|r| {
                let r = r as f64 / 10.0;
                points
                    .iter()
                    .filter_map(|c| Some((c.precision()?, c.recall()?)))
                    .filter(|&(_, rec)| rec >= r)
                    .map(|(p, _)| p)
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 11.0;

        let c = points[best];
        let rec = c.recall().unwrap_or(0.0);
        Ok(Metrics {
            max_f: best_f,
            ap,
            pre: c.precision().unwrap_or(0.0),
            rec,
            fpr: c.fpr(),
            fnr: 1.0 - rec,
            best_threshold: thresholds[best],
            counts: c,
        })
    }
}

pub fn compute_metrics(prob: &ProbabilityMap, gt: &GroundTruth) -> Result<Metrics> {
    let mut pool = SamplePool::new();
    pool.add(prob, gt)?;
    pool.metrics()
}
