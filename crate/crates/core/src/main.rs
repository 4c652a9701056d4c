use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use cavity_xyz::io::output::to_json;
use cavity_xyz::io::scenario::{self, RunError, RunOptions};
use cavity_xyz::io::{load_config, write_artifacts, Artifact, Format, RunConfig};

/// Collective-spin dynamics of atoms in a two-tone driven cavity.
///
/// Config keys can be overridden from the environment with `CXYZ_` followed by
/// the upper-case key path joined by `__`, e.g. `CXYZ_CAVITY__KAPPA_HZ=60e3`.
#[derive(Parser, Debug)]
#[command(name = "cxyz", version)]
struct Cli {
    /// JSON config file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Without it, artifacts are printed to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format (reports are always JSON).
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for projection-noise sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Effective couplings derived from the cavity and tone settings.
    Couplings,
    /// Flow vectors on the configured grid.
    Flowmap,
    /// Fixed points and their stability.
    FixedPoints,
    /// Four-photon detuning scan.
    Spectroscopy,
    /// Single trajectory from the configured initial state.
    Evolve,
    /// Exact-backend squeezing curves for one- and two-axis twisting.
    Squeeze,
    /// Reproduce a figure or analysis preset.
    Scenario {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(scenario::SCENARIOS))]
        name: String,
    },
}

fn run(cli: &Cli) -> Result<Vec<Artifact>, Box<dyn std::error::Error + Send + Sync>> {
    let preset = match &cli.command {
        Command::Scenario { name } => Some(name.as_str()),
        _ => None,
    };
    let cfg: RunConfig = load_config(cli.config.as_deref(), preset)?;
    let opts = RunOptions { format: cli.format, seed: cli.seed };
    info!("atoms {}, backend {:?}, duration {} s", cfg.n_atoms, cfg.backend, cfg.duration);
    let artifacts = match &cli.command {
        Command::Couplings => vec![Artifact::report("couplings", &scenario::couplings_report(&cfg)?)],
        Command::Flowmap => scenario::flowmap(&cfg, opts)?,
        Command::FixedPoints => {
            let spec = cfg.eom_spec()?;
            if !spec.is_resonant() {
                return Err(RunError::Unsupported("fixed points need interaction.delta_hz = 0".into()).into());
            }
            vec![Artifact::report("fixed_points", &scenario::fixed_points_report(&spec, cfg.n_atoms, &cfg)?)]
        }
        Command::Spectroscopy => scenario::spectroscopy(&cfg, opts)?,
        Command::Evolve => scenario::evolve(&cfg, opts)?,
        Command::Squeeze => scenario::squeeze(&cfg, opts)?,
        Command::Scenario { name } => scenario::run_scenario(name, &cfg, opts)?,
    };
    Ok(artifacts)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let artifacts = match run(&cli) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match &cli.out {
        Some(dir) => match write_artifacts(dir, &artifacts) {
            Ok(paths) => {
                let listing: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
                print!("{}", to_json(&listing));
            }
            Err(e) => {
                eprintln!("error: writing {}: {e}", dir.display());
                return ExitCode::FAILURE;
            }
        },
        None => {
            for a in &artifacts {
                if artifacts.len() > 1 {
                    println!("==> {} <==", a.file_name);
                }
                print!("{}", a.content);
            }
        }
    }
    ExitCode::SUCCESS
}
