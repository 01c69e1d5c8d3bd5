mod config;
mod detect;
mod eval;
mod output;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigArgs;

#[derive(Parser)]
#[command(
    name = "drivable",
    version,
    about = "Drivable-area detection from a camera image and a LIDAR sweep"
)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once
enum Command {
    /// Run the detector on a KITTI-layout directory.
    Detect {
        /// Root holding image_2/, velodyne/ and calib/.
        input: PathBuf,
        /// Output directory; gets prob/, mask/ and manifest.json.
        #[arg(short, long)]
        output: PathBuf,
        /// Only this frame id, e.g. um_000012.
        #[arg(long)]
        frame: Option<String>,
        /// Also write overlays, ray maps, segment boundaries and posterior CSVs.
        #[arg(long)]
        debug_overlays: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score probability maps against ground truth.
    Eval {
        /// Detect output directory, or a directory of 16-bit probability PNGs.
        pred: PathBuf,
        /// KITTI root with gt_image_2/, or the ground-truth directory itself.
        gt: PathBuf,
        /// Where to write the metrics CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also print one row per frame.
        #[arg(long)]
        per_frame: bool,
    },
    /// Write synthetic scenes in KITTI layout.
    Synth {
        /// Output root in KITTI layout.
        #[arg(short, long)]
        output: PathBuf,
        /// Scene description (TOML). Without it, random street scenes are generated.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Number of random street scenes.
        #[arg(long, default_value_t = 1, conflicts_with = "spec")]
        count: u64,
        /// Seed of the first random scene; scene `i` uses `first_seed + i`.
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Detect {
            input,
            output,
            frame,
            debug_overlays,
            config,
        } => detect::run(&input, &output, frame.as_deref(), debug_overlays, &config),
        Command::Eval {
            pred,
            gt,
            csv,
            per_frame,
        } => eval::run(&pred, &gt, csv.as_deref(), per_frame),
        Command::Synth {
            output,
            spec,
            count,
            first_seed,
        } => synth::run(&output, spec.as_deref(), count, first_seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
