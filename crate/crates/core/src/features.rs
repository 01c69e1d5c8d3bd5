//! Per-superpixel features and their self-learned Gaussian models.
//!
//! Four cues describe each superpixel: the cumulative height step along its
//! beam (level), the steepest member normal (normal), the mean
//! illumination-invariant color (color), and the density of unobstructed
//! ray points (strength). Model parameters are estimated per frame over the
//! initial drivable seeds only.

use crate::ingest::FusedPoint;
use crate::obstacle::NormalField;
use crate::par;
use crate::preprocess::{IlluminationImage, SuperpixelMap};
use crate::raymap::{BeamSet, InitialArea};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Level,
    Normal,
    Color,
    Strength,
}

impl Feature {
    pub const ALL: [Feature; 4] = [
        Feature::Level,
        Feature::Normal,
        Feature::Color,
        Feature::Strength,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Level => "level",
            Feature::Normal => "normal",
            Feature::Color => "color",
            Feature::Strength => "strength",
        }
    }
}

/// Cumulative height discontinuity per point.
///
/// Walking each beam outward, an obstacle point adds `|z_i - z_{i-1}|` to
/// itself and every farther point of the beam. The nearest point of a beam
/// has no predecessor and contributes nothing.
pub fn level_feature(beams: &BeamSet, obstacle: &[bool], points: &[FusedPoint]) -> Vec<f64> {
    let mut level = vec![0.0; points.len()];
    for beam in &beams.beams {
        let mut acc = 0.0;
        for (pos, &i) in beam.iter().enumerate() {
            if obstacle[i] && pos > 0 {
                acc += (points[i].z - points[beam[pos - 1]].z).abs();
            }
            level[i] = acc;
        }
    }
    level
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SuperpixelFeatures {
    /// Mean member level, meters.
    pub level: Option<f64>,
    /// Minimum member normal z.
    pub normal: Option<f64>,
    /// Mean illumination-invariant value over member pixels.
    pub color: f64,
    /// Number of member points lying on retained rays.
    pub strength: Option<usize>,
    /// `strength * dist(centroid, base) / area`.
    pub strength_score: Option<f64>,
}

impl SuperpixelFeatures {
    pub fn value(&self, f: Feature) -> Option<f64> {
        match f {
            Feature::Level => self.level,
            Feature::Normal => self.normal,
            Feature::Color => Some(self.color),
            Feature::Strength => self.strength_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<SuperpixelFeatures>,
}

pub fn aggregate_features(
    sp: &SuperpixelMap,
    area: &InitialArea,
    levels: &[f64],
    normals: &NormalField,
    ii: &IlluminationImage,
    on_ray: &[bool],
    base: (f64, f64),
) -> FeatureTable {
    let rows = par::map_range(sp.len(), |s| {
        let seg = &sp.segments[s];
        let members = &area.members[s];
        let color = seg
            .pixels
            .iter()
            .map(|&i| ii.values[i as usize])
            .sum::<f64>()
            / seg.area() as f64;
        if members.is_empty() {
            return SuperpixelFeatures {
                color,
                ..Default::default()
            };
        }
        let level = members.iter().map(|&i| levels[i]).sum::<f64>() / members.len() as f64;
        let normal = members
            .iter()
            .filter_map(|&i| normals.z(i))
            .reduce(f64::min);
        let count = members.iter().filter(|&&i| on_ray[i]).count();
        let d = (seg.centroid.0 - base.0).hypot(seg.centroid.1 - base.1);
        SuperpixelFeatures {
            level: Some(level),
            normal,
            color,
            strength: Some(count),
            strength_score: Some(count as f64 * d / seg.area() as f64),
        }
    });
    FeatureTable { rows }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub level: Gaussian,
    pub normal: Gaussian,
    pub color: Gaussian,
    /// Normalizer for strength scores.
    pub strength_scale: f64,
    pub sigma_min: f64,
}

pub const DEFAULT_SIGMA_MIN: f64 = 1e-3;
pub const STRENGTH_PERCENTILE: f64 = 0.95;

/// Population mean and variance, variance floored at `sigma_min^2`. Fewer
/// than two samples yield the floor, and no samples yield `neutral` as mean.
pub fn fit_gaussian(values: &[f64], sigma_min: f64, neutral: f64) -> Gaussian {
    let floor = sigma_min * sigma_min;
    match values.len() {
        0 => Gaussian {
            mean: neutral,
            var: floor,
        },
        1 => Gaussian {
            mean: values[0],
            var: floor,
        },
        n => {
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            Gaussian {
                mean,
                var: var.max(floor),
            }
        }
    }
}

/// Linear-interpolated percentile, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn estimate_models(table: &FeatureTable, area: &InitialArea, sigma_min: f64) -> ModelParams {
    assert!(sigma_min > 0.0, "sigma_min must be positive");
    let collect = |f: Feature| -> Vec<f64> {
        area.seeds
            .iter()
            .filter_map(|&s| table.rows[s].value(f))
            .collect()
    };
    let scores = collect(Feature::Strength);
    let strength_scale = percentile(&scores, STRENGTH_PERCENTILE)
        .filter(|q| *q > 0.0)
        .unwrap_or(f64::MIN_POSITIVE);
    ModelParams {
        level: fit_gaussian(&collect(Feature::Level), sigma_min, 0.0),
        normal: fit_gaussian(&collect(Feature::Normal), sigma_min, 1.0),
        color: fit_gaussian(&collect(Feature::Color), sigma_min, 0.0),
        strength_scale,
        sigma_min,
    }
}

#[inline]
fn gauss(x: f64, g: &Gaussian) -> f64 {
    (-(x - g.mean).powi(2) / (2.0 * g.var)).exp()
}

/// 1 up to the mean, Gaussian tail above it.
pub fn level_probability(level: f64, g: &Gaussian) -> f64 {
    if level >= g.mean {
        gauss(level, g)
    } else {
        1.0
    }
}

/// Gaussian tail below the mean, 1 above it.
pub fn normal_probability(normal: f64, g: &Gaussian) -> f64 {
    if normal <= g.mean {
        gauss(normal, g)
    } else {
        1.0
    }
}

pub fn color_probability(color: f64, g: &Gaussian) -> f64 {
    gauss(color, g)
}

pub fn strength_probability(score: f64, scale: f64) -> f64 {
    (score / scale).min(1.0)
}

/// Per-superpixel drivable probability in each feature space, indexed by
/// [`Feature::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub rows: Vec<[Option<f64>; 4]>,
}

impl ProbabilityTable {
    pub fn get(&self, s: usize, f: Feature) -> Option<f64> {
        self.rows[s][f.index()]
    }
}

pub fn feature_probabilities(table: &FeatureTable, params: &ModelParams) -> ProbabilityTable {
    let rows = par::map_slice(&table.rows, |r| {
        [
            r.level.map(|l| level_probability(l, &params.level)),
            r.normal.map(|n| normal_probability(n, &params.normal)),
            Some(color_probability(r.color, &params.color)),
            r.strength_score
                .map(|s| strength_probability(s, params.strength_scale)),
        ]
    });
    ProbabilityTable { rows }
}
