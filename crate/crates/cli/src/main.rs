use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ocp_cli::preview::default_preview_path;
use ocp_cli::{
    load_config, run_eval, run_generate, run_preview, run_stats, CliError, GenerateArgs,
    PreviewArgs,
};

#[derive(Parser)]
#[command(
    name = "ocp",
    version,
    about = "Occlusion copy-paste augmentation for instance segmentation datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EngineOpts {
    /// JSON config; its keys override the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: basic, minsize, scale-aware, blend-fixed, blend-random, targeted, ocp
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Annotation file for the paste pool (defaults to --dataset)
    #[arg(long)]
    paste_source: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write an augmented copy of a dataset
    Generate {
        #[command(flatten)]
        engine: EngineOpts,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        epochs: u64,
        /// Encode images as JPEG instead of PNG
        #[arg(long)]
        jpeg: bool,
        /// Worker threads (defaults to all cores)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render one augmented image with instance overlays
    Preview {
        #[command(flatten)]
        engine: EngineOpts,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        image_id: u64,
        /// Output PNG, or a directory to place preview_<id>.png in
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Occlusion statistics of a dataset
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        /// JSON report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mask AP of predictions against a dataset
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// JSON report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            engine,
            dataset,
            images,
            out,
            epochs,
            jpeg,
            threads,
        } => {
            let config = load_config(
                engine.config.as_deref(),
                engine.preset.as_deref(),
                engine.seed,
            )?;
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Config(format!("invalid config: threads: {e}")))?;
            }
            let manifest = run_generate(&GenerateArgs {
                config,
                config_path: engine.config,
                dataset,
                images,
                out: out.clone(),
                epochs,
                paste_source: engine.paste_source,
                jpeg,
            })?;
            let c = &manifest.counts;
            println!(
                "wrote {} images to {} ({} pasted, {} removed, {} skipped; augment p50 {:.1} ms, p95 {:.1} ms)",
                c.images_processed,
                out.display(),
                c.instances_pasted,
                c.instances_removed,
                c.images_skipped,
                manifest.timings.augment_ms_p50,
                manifest.timings.augment_ms_p95
            );
        }
        Command::Preview {
            engine,
            dataset,
            images,
            image_id,
            out,
        } => {
            let config = load_config(
                engine.config.as_deref(),
                engine.preset.as_deref(),
                engine.seed,
            )?;
            let out = if out.is_dir() {
                default_preview_path(&out, image_id)
            } else {
                out
            };
            let s = run_preview(&PreviewArgs {
                config,
                dataset,
                images,
                image_id,
                out,
                paste_source: engine.paste_source,
            })?;
            println!(
                "{} ({} original, {} pasted)",
                s.path.display(),
                s.original_instances,
                s.pasted_instances
            );
        }
        Command::Stats { dataset, out } => {
            run_stats(&dataset, out.as_deref())?;
        }
        Command::Eval {
            dataset,
            predictions,
            out,
        } => {
            run_eval(&dataset, &predictions, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
