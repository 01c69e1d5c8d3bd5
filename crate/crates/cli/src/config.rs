//! Detector configuration: preset, then TOML file, then flags.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use drivable::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Defaults meant for KITTI HDL-64 sweeps.
    Kitti,
    /// Matches scenes from `drivable synth`.
    SyntheticStreet,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, value_enum, default_value_t = Preset::Kitti)]
    pub preset: Preset,
    /// TOML file with any subset of the config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Channel weight of the illumination-invariant image.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Target superpixel count.
    #[arg(long)]
    pub k: Option<usize>,
    /// Spatial weight of the superpixel clustering.
    #[arg(long)]
    pub compactness: Option<f64>,
    /// Superpixel clustering passes.
    #[arg(long)]
    pub slic_iterations: Option<usize>,
    /// Edge length limit of the point graph, meters.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Triangles flatter than this shape ratio give no normal, in [0, 1).
    #[arg(long)]
    pub sliver: Option<f64>,
    /// Obstacle slope threshold, degrees.
    #[arg(long)]
    pub c: Option<f64>,
    /// Polar beam count.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Ray-filter half-width, in beams.
    #[arg(long)]
    pub window: Option<usize>,
    /// Filtered rays shorter than this are dropped, pixels.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Floor on every fitted standard deviation.
    #[arg(long)]
    pub sigma_min: Option<f64>,
    /// Belief propagation iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Belief propagation stops when no message moves more than this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Posterior threshold of the binary mask.
    #[arg(long)]
    pub theta: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let base = match self.preset {
            Preset::Kitti => PipelineConfig::default(),
            Preset::SyntheticStreet => PipelineConfig::synthetic_street(),
        };
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                layer(base, &text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => base,
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(
            alpha,
            k,
            compactness,
            slic_iterations,
            epsilon,
            sliver,
            c,
            bins,
            window,
            r_min,
            sigma_min,
            max_iters,
            tol,
            theta
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fields present in `text` replace those of `base`.
fn layer(base: PipelineConfig, text: &str) -> Result<PipelineConfig> {
    let overrides: toml::Table = toml::from_str(text)?;
    let mut table = toml::Table::try_from(base)?;
    for (key, value) in overrides {
        table.insert(key, value);
    }
    Ok(table.try_into()?)
}
