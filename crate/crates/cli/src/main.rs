use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use log::info;
use skyfade::commands::{evaluate, fit, geometry, predict, simulate};
use skyfade::Config;
use skyfade_core::correlation::CorrelationMode;

#[derive(Parser)]
#[command(
    name = "skyfade",
    version,
    about = "UAV shadow-fading correlation models and Kriging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config with budget, ingest, fit, eval and sim sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate a measurement CSV with geometry, two-ray estimate and SF.
    Geometry {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a correlation model from a training CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Krige received power at target poses from tuning measurements.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Tuning measurements.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "angle_aware")]
        mode: CorrelationMode,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated random-subsampling RMSE benchmark; writes into a directory.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured modes; repeatable.
        #[arg(long)]
        mode: Vec<CorrelationMode>,
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize a flight with known correlation truth.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Geometry { input, out, common } => {
            let skipped = geometry::run(&input, &out, &Config::load(common.config.as_deref())?)?;
            info!("wrote {} ({} rows skipped)", out.display(), skipped.len());
        }
        Command::Fit { input, out, common } => {
            let fit = fit::run(&input, &out, &Config::load(common.config.as_deref())?)?;
            info!(
                "wrote {} from {} samples (DEDM max deviation {:.3})",
                out.display(),
                fit.report.n_samples,
                fit.report.dedm_max_deviation
            );
        }
        Command::Predict {
            model,
            input,
            targets,
            out,
            mode,
            common,
        } => {
            let config = Config::load(common.config.as_deref())?;
            let rows = predict::run(&model, &input, &targets, &out, mode, &config)?;
            info!("wrote {} predictions to {}", rows.len(), out.display());
        }
        Command::Evaluate {
            model,
            input,
            out,
            seed,
            mode,
            common,
        } => {
            let mut config = Config::load(common.config.as_deref())?;
            if let Some(s) = seed {
                config.eval.seed = s;
            }
            if !mode.is_empty() {
                config.eval.modes = mode;
            }
            let result = evaluate::run(&model, &input, &out, &config)?;
            for g in &result.summary.groups {
                info!("M = {:>4} {:<12} median RMSE {:.3} dB", g.m, g.mode, g.median_rmse_db);
            }
        }
        Command::Simulate { out, seed, common } => {
            let data = simulate::run(&out, &Config::load(common.config.as_deref())?, seed)?;
            info!("wrote {} samples to {}", data.samples.len(), out.display());
        }
    }
    Ok(())
}
