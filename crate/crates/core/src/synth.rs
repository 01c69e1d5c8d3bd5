//! Synthetic scenes with exact ground truth.
//!
//! A flat ground rectangle carries axis-aligned boxes. A spinning multi-ring
//! LIDAR and a forward-looking pinhole camera share the same ray caster, so
//! the ground-truth mask is the set of pixels whose first hit is the ground.

use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, Matrix3x4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::ingest::{Calibration, LidarPoint, PointCloud};
use crate::par;
use crate::raster::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundExtent {
    /// Ground covers `|x| <= forward`, meters.
    pub forward: f64,
    /// Ground covers `|y| <= lateral`, meters.
    pub lateral: f64,
}

/// Box standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    /// Footprint center `(x, y)` in the LIDAR frame, meters.
    pub center: [f64; 2],
    /// Extent along x, y, z, meters.
    pub size: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarSpec {
    pub rings: usize,
    pub points_per_ring: usize,
    /// Height of the sensor above the ground, meters.
    pub mount_height: f64,
    pub min_elevation_deg: f64,
    pub max_elevation_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub focal: f64,
    pub principal: [f64; 2],
    pub width: usize,
    pub height: usize,
    /// Camera center in the LIDAR frame; the optical axis looks along +x.
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub ground: GroundExtent,
    #[serde(default)]
    pub obstacles: Vec<BoxObstacle>,
    pub lidar: LidarSpec,
    pub camera: CameraSpec,
    /// Standard deviation of additive z noise, meters.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            ground: GroundExtent {
                forward: 40.0,
                lateral: 20.0,
            },
            obstacles: Vec::new(),
            lidar: LidarSpec {
                rings: 16,
                points_per_ring: 900,
                mount_height: 1.73,
                min_elevation_deg: -24.8,
                max_elevation_deg: 2.0,
            },
            camera: CameraSpec {
                focal: 360.0,
                principal: [310.5, 86.0],
                width: 621,
                height: 188,
                offset: [0.27, 0.0, -0.08],
            },
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    /// Street-like scene with `1..=4` boxes ahead of the vehicle and 2 cm
    /// height noise.
    ///
    /// The sensor packs 48 rings into the band the camera actually sees
    /// (-18 to -1.5 degrees) so ground points stay connected out to the far
    /// edge of the ground; pair it with
    /// [`PipelineConfig::synthetic_street`](crate::PipelineConfig::synthetic_street).
    pub fn random_street(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0b57);
        let count = rng.random_range(1..=4);
        let obstacles = (0..count)
            .map(|_| BoxObstacle {
                center: [rng.random_range(9.0..28.0), rng.random_range(-7.0..7.0)],
                size: [
                    rng.random_range(1.0..3.0),
                    rng.random_range(1.0..3.5),
                    rng.random_range(2.0..3.0),
                ],
            })
            .collect();
        Self {
            obstacles,
            lidar: LidarSpec {
                rings: 48,
                points_per_ring: 450,
                min_elevation_deg: -18.0,
                max_elevation_deg: -1.5,
                ..Self::default().lidar
            },
            noise_std: 0.02,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.camera;
        if c.focal.is_nan() || c.focal <= 0.0 {
            return Err(Error::param("camera focal length must be positive"));
        }
        if c.width == 0 || c.height == 0 {
            return Err(Error::param("image size must be nonzero"));
        }
        let l = &self.lidar;
        if l.rings == 0 || l.points_per_ring == 0 {
            return Err(Error::param("lidar needs at least one ring and one point"));
        }
        if l.mount_height.is_nan() || l.mount_height <= 0.0 {
            return Err(Error::param("lidar mount height must be positive"));
        }
        if l.min_elevation_deg > l.max_elevation_deg {
            return Err(Error::param("lidar elevation range is inverted"));
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return Err(Error::param("noise std must be non-negative"));
        }
        if !(self.ground.forward > 0.0 && self.ground.lateral > 0.0) {
            return Err(Error::param("ground extent must be positive"));
        }
        if c.offset[2] <= -l.mount_height {
            return Err(Error::param("camera is below the ground"));
        }
        for (i, b) in self.obstacles.iter().enumerate() {
            let inside = b.size.iter().all(|&s| s > 0.0)
                && (b.center[0].abs() + b.size[0] / 2.0) <= self.ground.forward
                && (b.center[1].abs() + b.size[1] / 2.0) <= self.ground.lateral;
            if !inside {
                return Err(Error::param(format!(
                    "obstacle {i} is empty or leaves the ground extent"
                )));
            }
        }
        Ok(())
    }

    /// Camera-to-LIDAR axis change: camera x right, y down, z forward.
    fn cam_rotation() -> Matrix3<f64> {
        Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
    }

    pub fn calibration(&self) -> Result<Calibration> {
        let c = &self.camera;
        let r = Self::cam_rotation();
        let t = -(r * Vector3::from(c.offset));
        let mut tr = Matrix3x4::zeros();
        tr.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        tr.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        let p = Matrix3x4::new(
            c.focal,
            0.0,
            c.principal[0],
            0.0,
            0.0,
            c.focal,
            c.principal[1],
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
        );
        Calibration::new(p, Matrix3::identity(), tr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Ground,
    /// Box index and the axis of the face that was hit.
    Box(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vector3<f64>,
    pub surface: Surface,
}

/// Nearest intersection of `origin + t * dir`, `t > 0`, with the scene.
pub fn cast_ray(spec: &SceneSpec, origin: Vector3<f64>, dir: Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let ground_z = -spec.lidar.mount_height;
    if dir.z < 0.0 {
        let t = (ground_z - origin.z) / dir.z;
        let p = origin + dir * t;
        if t > 0.0 && p.x.abs() <= spec.ground.forward && p.y.abs() <= spec.ground.lateral {
            best = Some(Hit {
                t,
                point: Vector3::new(p.x, p.y, ground_z),
                surface: Surface::Ground,
            });
        }
    }
    for (i, b) in spec.obstacles.iter().enumerate() {
        let lo = Vector3::new(
            b.center[0] - b.size[0] / 2.0,
            b.center[1] - b.size[1] / 2.0,
            ground_z,
        );
        let hi = Vector3::new(
            b.center[0] + b.size[0] / 2.0,
            b.center[1] + b.size[1] / 2.0,
            ground_z + b.size[2],
        );
        if let Some((t, axis)) = ray_box(origin, dir, lo, hi) {
            if best.is_none_or(|h| t < h.t) {
                let mut p = origin + dir * t;
                // Snap onto the face plane.
                p[axis] = if dir[axis] > 0.0 { lo[axis] } else { hi[axis] };
                best = Some(Hit {
                    t,
                    point: p,
                    surface: Surface::Box(i, axis),
                });
            }
        }
    }
    best
}

/// Slab test; returns the entry distance and the axis of the entry face.
pub fn ray_box(
    origin: Vector3<f64>,
    dir: Vector3<f64>,
    lo: Vector3<f64>,
    hi: Vector3<f64>,
) -> Option<(f64, usize)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 0;
    for k in 0..3 {
        if dir[k] == 0.0 {
            if origin[k] < lo[k] || origin[k] > hi[k] {
                return None;
            }
            continue;
        }
        let a = (lo[k] - origin[k]) / dir[k];
        let b = (hi[k] - origin[k]) / dir[k];
        let (t0, t1) = if a < b { (a, b) } else { (b, a) };
        if t0 > t_near {
            t_near = t0;
            axis = k;
        }
        t_far = t_far.min(t1);
    }
    (t_near <= t_far && t_near > 0.0).then_some((t_near, axis))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: RgbImage,
    pub cloud: PointCloud,
    pub calib: Calibration,
    pub ground_truth: GroundTruth,
}

const GROUND_RGB: [f64; 3] = [100.0, 100.0, 100.0];
const SKY_RGB: [f64; 3] = [170.0, 150.0, 230.0];
const BOX_RGB: [[f64; 3]; 4] = [
    [150.0, 60.0, 50.0],
    [60.0, 130.0, 60.0],
    [170.0, 150.0, 60.0],
    [90.0, 60.0, 140.0],
];

pub fn ring_elevations(l: &LidarSpec) -> Vec<f64> {
    if l.rings == 1 {
        return vec![l.min_elevation_deg];
    }
    (0..l.rings)
        .map(|r| {
            l.min_elevation_deg
                + (l.max_elevation_deg - l.min_elevation_deg) * r as f64 / (l.rings - 1) as f64
        })
        .collect()
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let calib = spec.calibration()?;

    // LIDAR sweep, ring by ring.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::param(e.to_string()))?;
    let mut points = Vec::new();
    let n = spec.lidar.points_per_ring;
    for elev in ring_elevations(&spec.lidar) {
        let e = elev.to_radians();
        for k in 0..n {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let dir = Vector3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin());
            if let Some(hit) = cast_ray(spec, Vector3::zeros(), dir) {
                let dz = if spec.noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                let reflectance = match hit.surface {
                    Surface::Ground => 0.3,
                    Surface::Box(..) => 0.6,
                };
                points.push(LidarPoint::new(
                    hit.point.x,
                    hit.point.y,
                    hit.point.z + dz,
                    reflectance,
                ));
            }
        }
    }

    // Camera render and ground truth.
    let cam = &spec.camera;
    let (w, h) = (cam.width, cam.height);
    let origin = Vector3::from(cam.offset);
    let rot_t = SceneSpec::cam_rotation().transpose();
    let hits: Vec<Option<Surface>> = par::map_range(w * h, |i| {
        let (u, v) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
        let d_cam = Vector3::new(
            (u - cam.principal[0]) / cam.focal,
            (v - cam.principal[1]) / cam.focal,
            1.0,
        );
        cast_ray(spec, origin, rot_t * d_cam).map(|h| h.surface)
    });

    let mut tex = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x1ce_7e57);
    let mut image = RgbImage::new(w as u32, h as u32);
    for (i, hit) in hits.iter().enumerate() {
        let (u, v) = (i % w, i / w);
        let (base, shade) = match hit {
            Some(Surface::Ground) => (GROUND_RGB, 1.0),
            Some(Surface::Box(b, axis)) => (
                BOX_RGB[b % BOX_RGB.len()],
                if *axis == 0 { 1.0 } else { 0.8 },
            ),
            None => (SKY_RGB, 1.0),
        };
        let gradient = 0.55 + 0.45 * (u as f64 + 0.5) / w as f64;
        let scale = shade * gradient * (1.0 + tex.random_range(-0.04..0.04));
        let mut px = [0u8; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let jitter = tex.random_range(-2.0..2.0);
            *out = (base[c] * scale + jitter).round().clamp(0.0, 255.0) as u8;
        }
        image.put_pixel(u as u32, v as u32, Rgb(px));
    }

    let road = Mask::from_vec(
        w,
        h,
        hits.iter().map(|s| *s == Some(Surface::Ground)).collect(),
    );
    Ok(Scene {
        image,
        cloud: PointCloud::new(points),
        calib,
        ground_truth: GroundTruth::from_road(road),
    })
}

/// Pixels showing a box face.
pub fn obstacle_pixels(spec: &SceneSpec) -> Mask {
    let cam = &spec.camera;
    let origin = Vector3::from(cam.offset);
    let rot_t = SceneSpec::cam_rotation().transpose();
    let data = par::map_range(cam.width * cam.height, |i| {
        let (u, v) = ((i % cam.width) as f64 + 0.5, (i / cam.width) as f64 + 0.5);
        let d = Vector3::new(
            (u - cam.principal[0]) / cam.focal,
            (v - cam.principal[1]) / cam.focal,
            1.0,
        );
        matches!(
            cast_ray(spec, origin, rot_t * d).map(|h| h.surface),
            Some(Surface::Box(..))
        )
    });
    Mask::from_vec(cam.width, cam.height, data)
}
