use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use drivable::dataset::{gt_name, load_gt_file};
use drivable::eval::{compute_metrics, SamplePool, CSV_HEADER};
use drivable::render::probability_from_png;

use crate::output::write_atomic;

pub fn run(pred: &Path, gt: &Path, csv: Option<&Path>, per_frame: bool) -> Result<()> {
    let pred_dir = if pred.join("prob").is_dir() {
        pred.join("prob")
    } else {
        pred.to_path_buf()
    };
    let gt_dir = if gt.join("gt_image_2").is_dir() {
        gt.join("gt_image_2")
    } else {
        gt.to_path_buf()
    };
    let frames = prediction_files(&pred_dir)?;
    if frames.is_empty() {
        bail!("no probability PNGs in {}", pred_dir.display());
    }

    let mut pool = SamplePool::new();
    let mut rows = Vec::new();
    for (id, path) in &frames {
        let prob = probability_from_png(
            &image::open(path)
                .with_context(|| format!("reading {}", path.display()))?
                .to_luma16(),
        );
        let gt_path = gt_dir.join(format!("{}.png", gt_name(id)));
        let truth =
            load_gt_file(&gt_path).with_context(|| format!("reading {}", gt_path.display()))?;
        if per_frame {
            rows.push((
                id.clone(),
                compute_metrics(&prob, &truth).with_context(|| id.clone())?,
            ));
        }
        pool.add(&prob, &truth).with_context(|| id.clone())?;
    }
    let m = pool.metrics()?;

    for (id, fm) in &rows {
        println!(
            "{id}: MaxF {:.2}  AP {:.2}",
            100.0 * fm.max_f,
            100.0 * fm.ap
        );
    }
    println!("{} frame(s), {} pixels\n{m}", frames.len(), pool.len());
    if let Some(path) = csv {
        let mut text = m.to_csv();
        if per_frame {
            text = format!("frame,{CSV_HEADER}\nall,{}\n", m.csv_row());
            for (id, fm) in &rows {
                text.push_str(&format!("{id},{}\n", fm.csv_row()));
            }
        }
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn prediction_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "png") {
            if let Some(stem) = path.file_stem() {
                out.push((stem.to_string_lossy().into_owned(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}
