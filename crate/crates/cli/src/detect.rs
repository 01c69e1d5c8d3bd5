use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use drivable::dataset::Layout;
use drivable::render::{boundaries, mask_png, overlay, probability_png, ray_png};
use drivable::{detect, Detection, PipelineConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ConfigArgs;
use crate::output::{sha256_file, write_atomic, write_png};

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config: PipelineConfig,
    debug_overlays: bool,
    frames: BTreeMap<String, FrameRecord>,
}

#[derive(Serialize)]
struct FrameRecord {
    /// Input file name to SHA-256.
    inputs: BTreeMap<String, String>,
    status: String,
    seeded: bool,
    converged: bool,
    iterations: usize,
}

pub fn run(
    input: &Path,
    output: &Path,
    frame: Option<&str>,
    debug: bool,
    args: &ConfigArgs,
) -> Result<()> {
    let config = args.resolve()?;
    let layout = Layout::new(input);
    let ids = match frame {
        Some(id) => vec![id.to_string()],
        None => layout
            .frame_ids()
            .with_context(|| format!("listing frames under {}", input.display()))?,
    };
    if ids.is_empty() {
        bail!("no frames under {}", input.join("image_2").display());
    }
    log::info!("{} frame(s), writing to {}", ids.len(), output.display());

    let records: Vec<(String, Result<FrameRecord>)> = ids
        .par_iter()
        .map(|id| (id.clone(), process(&layout, id, output, &config, debug)))
        .collect();

    let mut failed = 0;
    let mut frames = BTreeMap::new();
    for (id, rec) in records {
        let rec = rec.unwrap_or_else(|e| {
            log::error!("{id}: {e:#}");
            failed += 1;
            FrameRecord {
                inputs: hash_inputs(&layout, &id),
                status: format!("error: {e:#}"),
                seeded: false,
                converged: false,
                iterations: 0,
            }
        });
        frames.insert(id, rec);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        debug_overlays: debug,
        frames,
    };
    write_atomic(
        &output.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    if failed > 0 {
        bail!("{failed} of {} frame(s) failed", manifest.frames.len());
    }
    Ok(())
}

fn hash_inputs(layout: &Layout, id: &str) -> BTreeMap<String, String> {
    layout
        .inputs(id)
        .iter()
        .filter_map(|p| {
            let name = p
                .strip_prefix(&layout.root)
                .unwrap_or(p)
                .display()
                .to_string();
            sha256_file(p).ok().map(|h| (name, h))
        })
        .collect()
}

fn process(
    layout: &Layout,
    id: &str,
    out: &Path,
    config: &PipelineConfig,
    debug: bool,
) -> Result<FrameRecord> {
    let inputs = hash_inputs(layout, id);
    let frame = layout.load(id)?;
    let d = detect(&frame.image, &frame.cloud, &frame.calib, config)?;
    if !d.seeded() {
        log::warn!("{id}: no drivable seed, writing an all-negative result");
    }
    let png = format!("{id}.png");
    write_png(
        &out.join("prob").join(&png),
        probability_png(&d.posterior.pixels),
    )?;
    write_png(&out.join("mask").join(&png), mask_png(&d.mask()))?;
    if debug {
        write_png(
            &out.join("overlay").join(&png),
            overlay(&frame.image, &d.mask(), Some(&d.rays)),
        )?;
        let dbg = out.join("debug");
        write_png(&dbg.join(format!("{id}_rays.png")), ray_png(&d.rays))?;
        write_png(
            &dbg.join(format!("{id}_seed_rays.png")),
            ray_png(&d.raw_rays),
        )?;
        write_png(
            &dbg.join(format!("{id}_superpixels.png")),
            boundaries(&frame.image, &d.superpixels),
        )?;
        write_atomic(
            &dbg.join(format!("{id}_posterior.csv")),
            posterior_csv(&d).as_bytes(),
        )?;
    }
    log::info!(
        "{id}: {} segments, {} points, BP {} after {} iterations",
        d.superpixels.len(),
        d.points.len(),
        if d.posterior.converged {
            "converged"
        } else {
            "stopped"
        },
        d.posterior.iterations
    );
    Ok(FrameRecord {
        inputs,
        status: "ok".into(),
        seeded: d.seeded(),
        converged: d.posterior.converged,
        iterations: d.posterior.iterations,
    })
}

/// One row per superpixel: raw features, cue probabilities, posterior.
fn posterior_csv(d: &Detection) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut s = String::from("segment,area,seed,level,normal,color,strength,p_level,p_normal,p_color,p_strength,posterior\n");
    for (i, row) in d.features.rows.iter().enumerate() {
        let p = d
            .probabilities
            .as_ref()
            .map(|t| t.rows[i])
            .unwrap_or([None; 4]);
        s.push_str(&format!(
            "{i},{},{},{},{},{:.6},{},{},{},{},{},{:.6}\n",
            d.superpixels.segments[i].area(),
            u8::from(d.area.in_seed[i]),
            opt(row.level),
            opt(row.normal),
            row.color,
            opt(row.strength_score),
            opt(p[0]),
            opt(p[1]),
            opt(p[2]),
            opt(p[3]),
            d.posterior.superpixel[i],
        ));
    }
    s
}
