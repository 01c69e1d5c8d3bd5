use std::path::Path;

use anyhow::{Context, Result};
use drivable::dataset::Layout;
use drivable::synth::{generate_scene, SceneSpec};

pub fn run(out: &Path, spec: Option<&Path>, count: u64, first_seed: u64) -> Result<()> {
    let layout = Layout::new(out);
    let specs: Vec<(String, SceneSpec)> = match spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let spec: SceneSpec =
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            vec![(format!("um_{:06}", spec.seed), spec)]
        }
        None => (first_seed..first_seed + count)
            .map(|s| (format!("um_{s:06}"), SceneSpec::random_street(s)))
            .collect(),
    };
    for (id, spec) in specs {
        let scene = generate_scene(&spec).with_context(|| format!("scene {id}"))?;
        layout.write_scene(&id, &scene)?;
        log::info!(
            "{id}: {} points, {} road pixels",
            scene.cloud.len(),
            scene.ground_truth.road.count()
        );
    }
    Ok(())
}
