//! Runs the detector over seeded synthetic street scenes and prints MaxF /
//! FPR for the fused posterior and for each single cue.
//!
//! cargo run --release --example synthetic_sweep -- [scenes] [first_seed]

use std::time::Instant;

use drivable::eval::{compute_metrics, SamplePool};
use drivable::features::Feature;
use drivable::synth::{generate_scene, SceneSpec};
use drivable::{detect, PipelineConfig};

fn main() -> drivable::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenes: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let first: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = PipelineConfig::synthetic_street();

    let mut fused = SamplePool::new();
    let mut single: Vec<SamplePool> = Feature::ALL.iter().map(|_| SamplePool::new()).collect();
    for seed in first..first + scenes {
        let spec = SceneSpec::random_street(seed);
        let scene = generate_scene(&spec)?;
        let t = Instant::now();
        let det = detect(&scene.image, &scene.cloud, &scene.calib, &config)?;
        let elapsed = t.elapsed();
        let m = compute_metrics(&det.posterior.pixels, &scene.ground_truth)?;
        let obstacles = det.obstacle.iter().filter(|&&o| o).count();
        print!(
            "seed {seed:>3}: MaxF {:.4} FPR {:.4} | pts {} obst {} seeds {} rays {} | {:.0} ms |",
            m.max_f,
            m.fpr,
            det.points.len(),
            obstacles,
            det.area.seeds.len(),
            det.rays.ray_count(),
            elapsed.as_secs_f64() * 1e3
        );
        fused.add(&det.posterior.pixels, &scene.ground_truth)?;
        for (f, pool) in Feature::ALL.iter().zip(&mut single) {
            let p = det.posterior_with(&[*f]);
            let mf = compute_metrics(&p.pixels, &scene.ground_truth)?;
            print!(" {} {:.3}", f.name(), mf.max_f);
            pool.add(&p.pixels, &scene.ground_truth)?;
        }
        println!();
    }
    println!("pooled fused:\n{}", fused.metrics()?);
    for (f, pool) in Feature::ALL.iter().zip(&single) {
        println!("pooled {}: MaxF {:.4}", f.name(), pool.metrics()?.max_f);
    }
    Ok(())
}
