//! KITTI road directory layout.
//!
//! ```text
//! <root>/image_2/<id>.png
//! <root>/velodyne/<id>.bin
//! <root>/calib/<id>.txt
//! <root>/gt_image_2/<category>_road_<number>.png
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::error::{Error, Result};
use crate::eval::{decode_kitti_gt, encode_kitti_gt, GroundTruth};
use crate::ingest::{parse_calibration, read_velodyne, write_velodyne, Calibration, PointCloud};
use crate::synth::Scene;

#[derive(Debug, Clone)]
pub struct Frame {
    pub id: String,
    pub image: RgbImage,
    pub cloud: PointCloud,
    pub calib: Calibration,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

/// `um_000012` -> `um_road_000012`; ids without a category get a `road_` prefix.
pub fn gt_name(id: &str) -> String {
    match id.split_once('_') {
        Some((cat, rest)) => format!("{cat}_road_{rest}"),
        None => format!("road_{id}"),
    }
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn image_path(&self, id: &str) -> PathBuf {
        self.root.join("image_2").join(format!("{id}.png"))
    }

    pub fn velodyne_path(&self, id: &str) -> PathBuf {
        self.root.join("velodyne").join(format!("{id}.bin"))
    }

    pub fn calib_path(&self, id: &str) -> PathBuf {
        self.root.join("calib").join(format!("{id}.txt"))
    }

    pub fn gt_path(&self, id: &str) -> PathBuf {
        self.root
            .join("gt_image_2")
            .join(format!("{}.png", gt_name(id)))
    }

    /// Frame ids with an image, sorted.
    pub fn frame_ids(&self) -> Result<Vec<String>> {
        let dir = self.root.join("image_2");
        let mut ids: Vec<String> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Input files of a frame, for hashing and existence checks.
    pub fn inputs(&self, id: &str) -> [PathBuf; 3] {
        [
            self.image_path(id),
            self.velodyne_path(id),
            self.calib_path(id),
        ]
    }

    pub fn load(&self, id: &str) -> Result<Frame> {
        for p in self.inputs(id) {
            if !p.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("missing input {}", p.display()),
                )));
            }
        }
        let image = image::open(self.image_path(id))?.to_rgb8();
        let cloud = read_velodyne(self.velodyne_path(id))?.cloud;
        let calib = parse_calibration(self.calib_path(id))?;
        Ok(Frame {
            id: id.to_string(),
            image,
            cloud,
            calib,
        })
    }

    pub fn load_gt(&self, id: &str) -> Result<GroundTruth> {
        load_gt_file(&self.gt_path(id))
    }

    pub fn write_scene(&self, id: &str, scene: &Scene) -> Result<()> {
        for sub in ["image_2", "velodyne", "calib", "gt_image_2"] {
            fs::create_dir_all(self.root.join(sub))?;
        }
        scene.image.save(self.image_path(id))?;
        write_velodyne(self.velodyne_path(id), &scene.cloud)?;
        scene.calib.write(self.calib_path(id))?;
        encode_kitti_gt(&scene.ground_truth).save(self.gt_path(id))?;
        Ok(())
    }
}

pub fn load_gt_file(path: &Path) -> Result<GroundTruth> {
    Ok(decode_kitti_gt(&image::open(path)?.to_rgb8()))
}
