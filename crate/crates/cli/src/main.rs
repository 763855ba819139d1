//! `iadb`: config-driven training, sampling, checks and figures.
//!
//! Every command writes `manifest.toml` into the output directory. Passing
//! that manifest back as `--config` reproduces the run.

mod commands;
mod config;
mod error;
mod figures;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Run;
use config::{DensitySpec, RunConfig};
use error::CliError;
use figures::Figure;

#[derive(Debug, Parser)]
#[command(name = "iadb", version, about = "Iterative alpha-(de)blending runs")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of sampler steps. For figures, the largest mapping step count.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Sampler variant: a, b, c or d.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Blend schedule: uniform or cosine.
    #[arg(long, global = true)]
    schedule: Option<String>,
    /// Integrator: euler or rk2.
    #[arg(long, global = true)]
    integrator: Option<String>,
    /// Number of samples to generate (also the per-panel figure count).
    #[arg(long, global = true)]
    count: Option<usize>,
    /// Write one trajectory CSV per generated sample.
    #[arg(long, global = true)]
    trajectories: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a deblending network on pairs drawn from [p0] and [p1].
    Train,
    /// Push samples of [p0] to [p1] with the deterministic sampler.
    Generate,
    /// Compare the stochastic and deterministic samplers across step counts.
    Converge,
    /// Check that DDIM steps coincide with the blend sampler.
    DdimCheck,
    /// Warp the points in a CSV file.
    Warp { input: PathBuf },
    /// Distance between two sample files (W1 in 1D, sliced W in 2D).
    Eval { a: PathBuf, b: PathBuf },
    /// Render a figure as SVG plus CSV.
    Figure {
        #[arg(value_enum)]
        which: Figure,
    },
}

fn absolutize(path: &Path, base: &Path) -> PathBuf {
    let joined = base.join(path);
    joined.canonicalize().unwrap_or(joined)
}

fn resolve(cli: &Cli) -> Result<Run, CliError> {
    let (mut config, base) = match &cli.config {
        Some(path) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(path)?, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    // Point files become absolute so the manifest works from any directory.
    for spec in [config.p0.as_mut(), config.p1.as_mut()].into_iter().flatten() {
        if let DensitySpec::Points { file, .. } = spec {
            *file = absolutize(file, &base);
        }
    }
    if let Some(p) = config.figure.points.as_mut() {
        *p = absolutize(p, &base);
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(steps) = cli.steps {
        config.sample.steps = steps;
        if matches!(cli.command, Command::Figure { which: Figure::Fig4 }) {
            match config.figure.mapping_steps.last_mut() {
                Some(last) => *last = steps,
                None => config.figure.mapping_steps.push(steps),
            }
        }
    }
    if let Some(v) = &cli.variant {
        config.sample.variant = v.clone();
    }
    if let Some(s) = &cli.schedule {
        config.sample.schedule = s.clone();
    }
    if let Some(i) = &cli.integrator {
        config.sample.integrator = i.clone();
    }
    if let Some(n) = cli.count {
        config.sample.count = n;
        config.figure.count = n;
    }
    if cli.trajectories {
        config.sample.trajectories = true;
    }
    Ok(Run {
        config,
        base: PathBuf::from("."),
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("IADB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("IADB_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let run = resolve(cli)?;
    match &cli.command {
        Command::Train => commands::train_cmd(&run),
        Command::Generate => commands::generate_cmd(&run),
        Command::Converge => commands::converge_cmd(&run),
        Command::DdimCheck => commands::ddim_check_cmd(&run),
        Command::Warp { input } => commands::warp_cmd(&run, input),
        Command::Eval { a, b } => commands::eval_cmd(&run, a, b),
        Command::Figure { which } => figures::run_figure(&run, *which),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
