use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jcbeat::{default_workers, figure_presets, run_experiment, CliError, ExperimentConfig, ExperimentKind};

/// Simulations of a driven atom-cavity system at two-photon resonance.
#[derive(Debug, Parser)]
#[command(name = "jcbeat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[command(rename_all = "snake_case")]
enum Command {
    /// Stationary observables.
    Steady(RunArgs),
    /// Time evolution from the vacuum or from a conditioned state.
    Transient(RunArgs),
    /// Wigner function sampled on a grid.
    WignerGrid(RunArgs),
    /// W(0, τ) after a detection.
    WignerOrigin(RunArgs),
    /// Forward intensity correlation.
    G2(RunArgs),
    /// A single conditioned trajectory.
    Trajectory(RunArgs),
    /// Averages over many trajectories.
    Ensemble(RunArgs),
    /// A figure preset described by a config file.
    FigurePreset(RunArgs),
    /// Runs a built-in figure preset.
    Preset(PresetArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct PresetArgs {
    /// fig2, fig3a, fig3b, fig3c, fig4a or fig4b.
    name: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory; defaults to $JCBEAT_OUT/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn output_dir(explicit: Option<PathBuf>, from_config: Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    explicit
        .or(from_config)
        .or_else(|| std::env::var_os("JCBEAT_OUT").map(|root| PathBuf::from(root).join(name)))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set JCBEAT_OUT".into()))
}

fn load(path: &PathBuf, kind: ExperimentKind) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    match config.experiment {
        Some(k) if k != kind => {
            return Err(CliError::Config(format!("config describes '{}' but '{}' was requested", k.name(), kind.name())))
        }
        _ => config.experiment = Some(kind),
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (mut config, common, name) = match cli.command {
        Command::Preset(p) => {
            let config = figure_presets(&p.name)?;
            (config, p.common, p.name)
        }
        Command::Steady(a) => (load(&a.config, ExperimentKind::Steady)?, a.common, "steady".into()),
        Command::Transient(a) => (load(&a.config, ExperimentKind::Transient)?, a.common, "transient".into()),
        Command::WignerGrid(a) => (load(&a.config, ExperimentKind::WignerGrid)?, a.common, "wigner_grid".into()),
        Command::WignerOrigin(a) => (load(&a.config, ExperimentKind::WignerOrigin)?, a.common, "wigner_origin".into()),
        Command::G2(a) => (load(&a.config, ExperimentKind::G2)?, a.common, "g2".into()),
        Command::Trajectory(a) => (load(&a.config, ExperimentKind::Trajectory)?, a.common, "trajectory".into()),
        Command::Ensemble(a) => (load(&a.config, ExperimentKind::Ensemble)?, a.common, "ensemble".into()),
        Command::FigurePreset(a) => (load(&a.config, ExperimentKind::FigurePreset)?, a.common, "figure_preset".into()),
    };
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    let out = output_dir(common.out, config.output.clone(), &name)?;
    let workers = common.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    let summary = run_experiment(&config, &out, workers)?;
    for f in &summary.files {
        println!("{}", summary.out_dir.join(f).display());
    }
    println!("{}", summary.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jcbeat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
