//! End-to-end detector for one frame.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    aggregate_features, estimate_models, feature_probabilities, level_feature, Feature,
    FeatureTable, ModelParams, ProbabilityTable,
};
use crate::fusion::{build_network, run_bp, threshold_posterior, NetworkParams, PosteriorMap};
use crate::ingest::{project_points, Calibration, FusedPoint, PointCloud};
use crate::obstacle::{
    build_graph, classify_obstacles, compute_normals, AdjacencyGraph, NormalField,
};
use crate::preprocess::{
    illumination_invariant, segment_superpixels, IlluminationImage, SlicParams, SuperpixelMap,
};
use crate::raster::Mask;
use crate::raymap::{
    bin_points_polar, filter_rays, generate_drm, initial_area, ray_points, BeamSet, InitialArea,
    RayMap,
};

/// Every tunable of the detector in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Illumination-invariant mixing weight.
    pub alpha: f64,
    /// Target superpixel count.
    pub k: usize,
    pub compactness: f64,
    pub slic_iterations: usize,
    /// 3D edge length limit for the Delaunay graph, meters.
    pub epsilon: f64,
    /// Near-collinear triangles below this shape ratio get no normal; see
    /// [`crate::obstacle::triangle_normal`].
    pub sliver: f64,
    /// Minimum deviation from horizontal of an obstacle surface, degrees.
    pub c: f64,
    /// Number of polar beams.
    pub bins: usize,
    /// Half-width of the ray-length minimum window, in beams.
    pub window: usize,
    /// Rays shorter than this after filtering are dropped, pixels.
    pub r_min: f64,
    pub sigma_min: f64,
    pub eps_likelihood: f64,
    pub eps_compat: f64,
    pub psi_default: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Posterior threshold for the binary mask.
    pub theta: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let net = NetworkParams::default();
        Self {
            alpha: crate::preprocess::DEFAULT_ALPHA,
            k: 1000,
            compactness: 10.0,
            slic_iterations: 10,
            epsilon: 0.5,
            sliver: 0.0,
            c: 30.0,
            bins: 720,
            window: 3,
            r_min: 30.0,
            sigma_min: crate::features::DEFAULT_SIGMA_MIN,
            eps_likelihood: net.eps_likelihood,
            eps_compat: net.eps_compat,
            psi_default: net.psi_default,
            max_iters: 30,
            tol: 1e-6,
            theta: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::param(msg)) };
        check(
            self.alpha > 0.0 && self.alpha < 1.0,
            "alpha must lie in (0, 1)",
        )?;
        check(self.k >= 1, "k must be at least 1")?;
        check(self.compactness > 0.0, "compactness must be positive")?;
        check(
            self.slic_iterations >= 1,
            "slic_iterations must be at least 1",
        )?;
        check(self.epsilon > 0.0, "epsilon must be positive")?;
        check(
            (0.0..1.0).contains(&self.sliver),
            "sliver must lie in [0, 1)",
        )?;
        check(
            self.c > 0.0 && self.c < 90.0,
            "c must lie in (0, 90) degrees",
        )?;
        check(self.bins >= 1, "bins must be at least 1")?;
        check(self.r_min >= 0.0, "r_min must be non-negative")?;
        check(self.sigma_min > 0.0, "sigma_min must be positive")?;
        check(
            self.eps_likelihood > 0.0 && self.eps_likelihood < 1.0,
            "eps_likelihood must lie in (0, 1)",
        )?;
        check(
            self.eps_compat > 0.0 && self.eps_compat <= 1.0,
            "eps_compat must lie in (0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.psi_default),
            "psi_default must lie in [0, 1]",
        )?;
        check(self.max_iters >= 1, "max_iters must be at least 1")?;
        check(self.tol > 0.0, "tol must be positive")?;
        check(
            (0.0..=1.0).contains(&self.theta),
            "theta must lie in [0, 1]",
        )?;
        Ok(())
    }

    /// Settings for scenes from [`crate::synth::SceneSpec::random_street`].
    ///
    /// Ring gaps on far ground reach several meters there, so the edge limit
    /// is raised to keep the ground connected; 2 cm height noise on
    /// near-collinear hull triangles otherwise yields spurious steep normals.
    pub fn synthetic_street() -> Self {
        Self {
            epsilon: 3.0,
            sliver: 0.1,
            ..Self::default()
        }
    }

    pub fn slic(&self) -> SlicParams {
        SlicParams {
            k: self.k,
            compactness: self.compactness,
            iterations: self.slic_iterations,
        }
    }

    pub fn network(&self) -> NetworkParams {
        NetworkParams {
            eps_likelihood: self.eps_likelihood,
            eps_compat: self.eps_compat,
            psi_default: self.psi_default,
        }
    }
}

/// Everything computed for one frame.
#[derive(Debug, Clone)]
pub struct Detection {
    pub config: PipelineConfig,
    pub superpixels: SuperpixelMap,
    pub illumination: IlluminationImage,
    pub points: Vec<FusedPoint>,
    pub graph: AdjacencyGraph,
    pub normals: NormalField,
    pub obstacle: Vec<bool>,
    pub beams: BeamSet,
    pub raw_rays: RayMap,
    pub rays: RayMap,
    pub area: InitialArea,
    pub levels: Vec<f64>,
    pub on_ray: Vec<bool>,
    pub features: FeatureTable,
    /// `None` when no superpixel was seeded.
    pub models: Option<ModelParams>,
    pub probabilities: Option<ProbabilityTable>,
    pub posterior: PosteriorMap,
}

impl Detection {
    /// False when the ray map touched no superpixel; the posterior is then
    /// all zeros.
    pub fn seeded(&self) -> bool {
        !self.area.is_empty()
    }

    pub fn mask(&self) -> Mask {
        threshold_posterior(&self.posterior, self.config.theta)
    }

    /// Posterior from a subset of the feature cues, for ablations.
    pub fn posterior_with(&self, features: &[Feature]) -> PosteriorMap {
        match (&self.models, &self.probabilities) {
            (Some(models), Some(probs)) => fuse(
                &self.superpixels,
                probs,
                &self.features,
                models,
                &self.config,
                features,
            ),
            _ => empty_posterior(&self.superpixels),
        }
    }

    /// Initial seed area as a 0/1 map.
    pub fn seed_posterior(&self) -> PosteriorMap {
        let sp = self
            .area
            .in_seed
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        PosteriorMap::from_superpixels(&self.superpixels, sp, true, 0)
    }
}

fn empty_posterior(sp: &SuperpixelMap) -> PosteriorMap {
    PosteriorMap::from_superpixels(sp, vec![0.0; sp.len()], true, 0)
}

fn fuse(
    sp: &SuperpixelMap,
    probs: &ProbabilityTable,
    table: &FeatureTable,
    models: &ModelParams,
    config: &PipelineConfig,
    features: &[Feature],
) -> PosteriorMap {
    let net = build_network(sp, probs, table, models, &config.network(), features);
    let bp = run_bp(&net, config.max_iters, config.tol);
    PosteriorMap::from_bp(sp, &bp)
}

pub fn detect(
    image: &RgbImage,
    cloud: &PointCloud,
    calib: &Calibration,
    config: &PipelineConfig,
) -> Result<Detection> {
    config.validate()?;
    let (w, h) = (image.width() as usize, image.height() as usize);

    let superpixels = segment_superpixels(image, &config.slic())?;
    let illumination = illumination_invariant(image, config.alpha);

    let points = project_points(cloud, calib, w, h);
    let graph = build_graph(&points, config.epsilon);
    let normals = compute_normals(&graph, &points, config.sliver);
    let obstacle = classify_obstacles(&normals, config.c);

    let beams = bin_points_polar(&points, w, h, config.bins);
    let raw_rays = generate_drm(&beams, &points, &obstacle);
    let rays = filter_rays(&raw_rays, config.window, config.r_min);
    let area = initial_area(&rays, &superpixels, &points);

    let levels = level_feature(&beams, &obstacle, &points);
    let on_ray = ray_points(&beams, &rays);
    let features = aggregate_features(
        &superpixels,
        &area,
        &levels,
        &normals,
        &illumination,
        &on_ray,
        beams.base,
    );

    let (models, probabilities, posterior) = if area.is_empty() {
        log::warn!("no drivable seed: the ray map touches no superpixel");
        (None, None, empty_posterior(&superpixels))
    } else {
        let models = estimate_models(&features, &area, config.sigma_min);
        let probs = feature_probabilities(&features, &models);
        let post = fuse(
            &superpixels,
            &probs,
            &features,
            &models,
            config,
            &Feature::ALL,
        );
        (Some(models), Some(probs), post)
    };

    Ok(Detection {
        config: *config,
        superpixels,
        illumination,
        points,
        graph,
        normals,
        obstacle,
        beams,
        raw_rays,
        rays,
        area,
        levels,
        on_ray,
        features,
        models,
        probabilities,
        posterior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
        PipelineConfig::synthetic_street().validate().unwrap();
    }

    #[test]
    fn out_of_range_rejected() {
        let bad = [
            PipelineConfig {
                alpha: 1.0,
                ..Default::default()
            },
            PipelineConfig {
                c: 90.0,
                ..Default::default()
            },
            PipelineConfig {
                bins: 0,
                ..Default::default()
            },
            PipelineConfig {
                theta: 1.5,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn empty_cloud_gives_empty_result() {
        let img = RgbImage::from_pixel(40, 20, image::Rgb([90, 90, 90]));
        let calib = crate::synth::SceneSpec::default().calibration().unwrap();
        let cfg = PipelineConfig {
            k: 10,
            ..Default::default()
        };
        let det = detect(&img, &PointCloud::default(), &calib, &cfg).unwrap();
        assert!(!det.seeded());
        assert!(det.posterior.pixels.data.iter().all(|&p| p == 0.0));
        assert_eq!(det.mask().count(), 0);
    }
}
