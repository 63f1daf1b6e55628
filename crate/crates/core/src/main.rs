use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use clothclone::pipeline::{
    cmd_clone, cmd_crop, cmd_crop_stats, cmd_curate, cmd_preview, cmd_probe, cmd_qualify, PipelineConfig, StageSummary,
};
use clothclone::Rect;

#[derive(Parser)]
#[command(name = "clothclone", version, about = "Clone garment textures onto UV maps and curate characters")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Treat per-item warnings as failure.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Gate detections and classify views.
    Qualify,
    /// Deduplicate, cluster and split the qualified images.
    Curate {
        /// Random baseline: draw N images instead of clustering.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long)]
        keep_noise_singletons: bool,
    },
    /// Clone the garments of every selected image.
    Clone,
    /// Disturbance-crop the character images.
    Crop {
        /// Also emit crop logs for the full ρ/τ ablation grid.
        #[arg(long)]
        sweep: bool,
        /// Run N synthetic draws and write statistics instead.
        #[arg(long)]
        stats: Option<usize>,
        /// Crop probability.
        #[arg(long)]
        rho: Option<f64>,
        /// Per-side width removal bound.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Contact sheets of source, registered and expanded maps.
    Preview,
    /// Frontal-area probing of a template with a synthetic crop oracle.
    Probe {
        /// Template id.
        #[arg(long)]
        template: String,
        /// Viewed UV rectangle as x,y,w,h.
        #[arg(long, value_parser = parse_rect)]
        view: Rect,
        /// Oracle sampling step in pixels.
        #[arg(long, default_value_t = 1)]
        step: u32,
        /// White square side; stride defaults to half of it.
        #[arg(long)]
        square: Option<u32>,
        #[arg(long)]
        stride: Option<u32>,
        /// Mean absolute difference a placement must exceed to fire.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] => Ok(Rect::new(x, y, w, h)),
        _ => Err("expected x,y,w,h".into()),
    }
}

fn run(cli: Cli) -> Result<StageSummary> {
    let mut config = match &cli.global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.global.output {
        config.output = out;
    }
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Qualify => cmd_qualify(&config).map(|(_, s)| s),
        Command::Curate {
            random,
            keep_noise_singletons,
        } => {
            config.curate.keep_noise_singletons |= keep_noise_singletons;
            cmd_curate(&config, random).map(|(_, s)| s)
        }
        Command::Clone => cmd_clone(&config).map(|(_, s)| s),
        Command::Crop { sweep, stats, rho, tau } => {
            if let Some(rho) = rho {
                config.crop.probability = rho;
            }
            if let Some(tau) = tau {
                config.crop.side_rate = tau;
            }
            config.crop.validate()?;
            match stats {
                Some(n) => {
                    let s = cmd_crop_stats(&config, n, (128, 256))?;
                    println!("{}", serde_json::to_string_pretty(&s)?);
                    if s.bound_violations > 0 {
                        bail!("{} crops broke the policy bounds", s.bound_violations);
                    }
                    Ok(StageSummary { items: n, warnings: 0 })
                }
                None => cmd_crop(&config, sweep),
            }
        }
        Command::Preview => cmd_preview(&config),
        Command::Probe {
            template,
            view,
            step,
            square,
            stride,
            threshold,
        } => {
            if let Some(s) = square {
                config.probe.square = s;
                config.probe.stride = stride.unwrap_or(s / 2).max(1);
            }
            if let Some(s) = stride {
                config.probe.stride = s;
            }
            if let Some(t) = threshold {
                config.probe.threshold = t;
            }
            let report = cmd_probe(&config, &template, view, step)?;
            let fired = report.placements.iter().filter(|p| p.fired).count();
            println!(
                "{fired} of {} placements responded; mask covers {} px",
                report.placements.len(),
                report.mask.0.count()
            );
            Ok(StageSummary {
                items: report.placements.len(),
                warnings: 0,
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let strict = cli.global.strict;
    match run(cli) {
        Ok(summary) if strict && summary.warnings > 0 => {
            log::error!("{} warnings in strict mode", summary.warnings);
            ExitCode::from(2)
        }
        Ok(summary) => {
            if summary.warnings > 0 {
                log::warn!("finished with {} warnings", summary.warnings);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
