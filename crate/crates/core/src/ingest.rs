//! KITTI-format sensor input and LIDAR-to-image projection.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector4};

use crate::error::{Error, Result};

/// Key of the rectified projection matrix of the left color camera.
pub const KEY_PROJECTION: &str = "P2";
pub const KEY_RECTIFICATION: &str = "R0_rect";
pub const KEY_LIDAR_TO_CAM: &str = "Tr_velo_to_cam";

/// One LIDAR return. `x` forward, `y` left, `z` up, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Read for format fidelity; unused by the detector.
    pub reflectance: f64,
}

impl LidarPoint {
    pub fn new(x: f64, y: f64, z: f64, reflectance: f64) -> Self {
        Self {
            x,
            y,
            z,
            reflectance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<LidarPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<LidarPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Result of decoding a velodyne scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VelodyneScan {
    pub cloud: PointCloud,
    /// Records dropped because one of their four values was not finite.
    pub rejected: usize,
}

const RECORD_BYTES: usize = 16;

/// Decodes little-endian `f32 x4` records.
pub fn decode_velodyne(bytes: &[u8]) -> Result<VelodyneScan> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::format(format!(
            "velodyne payload of {} bytes is not a multiple of {RECORD_BYTES}",
            bytes.len()
        )));
    }
    let mut scan = VelodyneScan::default();
    scan.cloud.points.reserve(bytes.len() / RECORD_BYTES);
    for rec in bytes.chunks_exact(RECORD_BYTES) {
        let mut vals = [0f32; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            let b = &rec[4 * k..4 * k + 4];
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        if vals.iter().all(|v| v.is_finite()) {
            scan.cloud.points.push(LidarPoint::new(
                vals[0] as f64,
                vals[1] as f64,
                vals[2] as f64,
                vals[3] as f64,
            ));
        } else {
            scan.rejected += 1;
        }
    }
    Ok(scan)
}

pub fn read_velodyne(path: impl AsRef<Path>) -> Result<VelodyneScan> {
    let bytes = fs::read(path.as_ref())?;
    let scan = decode_velodyne(&bytes)?;
    if scan.rejected > 0 {
        log::warn!(
            "{}: rejected {} non-finite records",
            path.as_ref().display(),
            scan.rejected
        );
    }
    Ok(scan)
}

pub fn encode_velodyne(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.reflectance] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_velodyne(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    fs::write(path, encode_velodyne(cloud))?;
    Ok(())
}

/// Camera calibration for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub projection: Matrix3x4<f64>,
    /// 3x3 rectification embedded in a 4x4 identity.
    pub rectification: Matrix4<f64>,
    pub lidar_to_cam: Matrix4<f64>,
}

impl Calibration {
    pub fn new(
        projection: Matrix3x4<f64>,
        rectification: Matrix3<f64>,
        lidar_to_cam: Matrix3x4<f64>,
    ) -> Result<Self> {
        let mut rect = Matrix4::identity();
        rect.fixed_view_mut::<3, 3>(0, 0).copy_from(&rectification);
        let mut tr = Matrix4::identity();
        tr.fixed_view_mut::<3, 4>(0, 0).copy_from(&lidar_to_cam);
        let calib = Self {
            projection,
            rectification: rect,
            lidar_to_cam: tr,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<()> {
        let bottom = self.lidar_to_cam.row(3);
        if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 0.0 || bottom[3] != 1.0 {
            return Err(Error::format(
                "lidar-to-camera bottom row must be (0,0,0,1)",
            ));
        }
        if self.projection[(0, 0)] == 0.0 || self.projection[(1, 1)] == 0.0 {
            return Err(Error::format("projection has a zero focal entry"));
        }
        Ok(())
    }

    /// Rectified camera frame from LIDAR frame.
    pub fn lidar_to_rect(&self) -> Matrix4<f64> {
        self.rectification * self.lidar_to_cam
    }

    /// Full 3x4 map from homogeneous LIDAR coordinates to homogeneous pixels.
    pub fn lidar_to_image(&self) -> Matrix3x4<f64> {
        self.projection * self.lidar_to_rect()
    }

    /// KITTI text form with the three keys used here.
    pub fn to_kitti_string(&self) -> String {
        let mut s = String::new();
        let fmt = |vals: Vec<f64>| {
            vals.iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let p: Vec<f64> = (0..3)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| self.projection[(r, c)])
            .collect();
        let rect: Vec<f64> = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| self.rectification[(r, c)])
            .collect();
        let tr: Vec<f64> = (0..3)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| self.lidar_to_cam[(r, c)])
            .collect();
        s.push_str(&format!("{KEY_PROJECTION}: {}\n", fmt(p)));
        s.push_str(&format!("{KEY_RECTIFICATION}: {}\n", fmt(rect)));
        s.push_str(&format!("{KEY_LIDAR_TO_CAM}: {}\n", fmt(tr)));
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_kitti_string().as_bytes())?;
        Ok(())
    }
}

/// Parses `KEY: v1 v2 ...` lines. Unknown keys are ignored.
pub fn parse_calibration_str(text: &str) -> Result<Calibration> {
    let mut entries: HashMap<&str, Vec<f64>> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            return Err(Error::format(format!(
                "line {}: expected `KEY: values`",
                lineno + 1
            )));
        };
        let vals = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::format(format!("line {}: bad number `{t}`", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>();
        // Non-numeric lines (e.g. calib_time) are skipped unless we need the key.
        match vals {
            Ok(v) => {
                entries.insert(key.trim(), v);
            }
            Err(e) => {
                if [KEY_PROJECTION, KEY_RECTIFICATION, KEY_LIDAR_TO_CAM].contains(&key.trim()) {
                    return Err(e);
                }
            }
        }
    }

    let take = |key: &str, n: usize| -> Result<&Vec<f64>> {
        let v = entries
            .get(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))?;
        if v.len() != n {
            return Err(Error::format(format!(
                "`{key}` has {} values, expected {n}",
                v.len()
            )));
        }
        Ok(v)
    };

    let p = take(KEY_PROJECTION, 12)?;
    let r = take(KEY_RECTIFICATION, 9)?;
    let t = take(KEY_LIDAR_TO_CAM, 12)?;
    Calibration::new(
        Matrix3x4::from_row_slice(p),
        Matrix3::from_row_slice(r),
        Matrix3x4::from_row_slice(t),
    )
}

pub fn parse_calibration(path: impl AsRef<Path>) -> Result<Calibration> {
    parse_calibration_str(&fs::read_to_string(path)?)
}

/// A LIDAR return annotated with its image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedPoint {
    /// Position of the source point in the input cloud.
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
}

impl FusedPoint {
    /// Integer pixel containing the point.
    #[inline]
    pub fn pixel(&self) -> (usize, usize) {
        (self.u.floor() as usize, self.v.floor() as usize)
    }

    pub fn dist3(&self, other: &FusedPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Projects every point through `P * R_rect * Tr`, keeping points in front of
/// the camera that land inside `[0, width) x [0, height)`.
pub fn project_points(
    cloud: &PointCloud,
    calib: &Calibration,
    width: usize,
    height: usize,
) -> Vec<FusedPoint> {
    let to_rect = calib.lidar_to_rect();
    let proj = calib.projection;
    let (w, h) = (width as f64, height as f64);
    cloud
        .points
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            let cam = to_rect * Vector4::new(p.x, p.y, p.z, 1.0);
            if cam[2] <= 0.0 {
                return None;
            }
            let img = proj * cam;
            if img[2] <= 0.0 {
                return None;
            }
            let u = img[0] / img[2];
            let v = img[1] / img[2];
            if !(u >= 0.0 && u < w && v >= 0.0 && v < h) {
                return None;
            }
            Some(FusedPoint {
                index,
                x: p.x,
                y: p.y,
                z: p.z,
                u,
                v,
            })
        })
        .collect()
}
