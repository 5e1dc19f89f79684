mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::Config;

/// Experiment harness for the film/substrate lattice model: surface-tension
/// oracles, recovery-sequence sweeps, relaxations, rigidity probes, annealing,
/// and profile transforms. All commands are deterministic given (config, seed).
#[derive(Parser)]
#[command(name = "film-lattice", version, about)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output path; stdout when omitted. Commands with side artifacts write
    /// siblings next to this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed for stochastic commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Comma-separated epsilon list overriding the config (surface-oracle).
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,

    /// Comma-separated k list overriding the config (recovery).
    #[arg(long, global = true, value_delimiter = ',')]
    k_list: Option<Vec<u32>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Missing-bond density of half-plane strips against the surface tension.
    SurfaceOracle,
    /// Recovery-sequence convergence sweep against the continuum energy.
    Recovery,
    /// Minimize the elastic energy at fixed profile.
    Relax,
    /// Evaluate surface and elastic energies of a configuration.
    Energy,
    /// Empirical rigidity constant of a deformation.
    RigidityProbe,
    /// Metropolis annealing of the profile at exact volume.
    Anneal,
    /// Yosida transforms of a continuum profile with surface energies.
    Yosida,
    /// Exact-volume rebalancing of a continuum approximant.
    Rebalance,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sibling(base: &PathBuf, suffix: &str) -> PathBuf {
    let mut name = base.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    base.with_file_name(name)
}

fn run(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_ref()
        .context("--config is required")?;
    let cfg = Config::load(config_path)?;
    match cli.command {
        Command::SurfaceOracle => {
            let csv = commands::cmd_surface_oracle(&cfg, cli.eps_list.clone())?;
            emit(&cli.out, &csv)
        }
        Command::Recovery => {
            let csv = commands::cmd_recovery(&cfg, cli.k_list.clone())?;
            emit(&cli.out, &csv)
        }
        Command::Relax => {
            let artifacts = commands::cmd_relax(&cfg)?;
            emit(&cli.out, &artifacts.report)?;
            if let Some(base) = &cli.out {
                std::fs::write(sibling(base, ".deformation.csv"), &artifacts.deformation)?;
                if let Some(trace) = &artifacts.trace {
                    std::fs::write(sibling(base, ".trace.csv"), trace)?;
                }
            }
            Ok(())
        }
        Command::Energy => emit(&cli.out, &commands::cmd_energy(&cfg)?),
        Command::RigidityProbe => emit(&cli.out, &commands::cmd_rigidity_probe(&cfg, cli.seed)?),
        Command::Anneal => emit(&cli.out, &commands::cmd_anneal(&cfg, cli.seed)?),
        Command::Yosida => emit(&cli.out, &commands::cmd_yosida(&cfg)?),
        Command::Rebalance => emit(&cli.out, &commands::cmd_rebalance(&cfg)?),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        let doc = serde_json::json!({ "error": format!("{err:#}") });
        eprintln!("{doc}");
        std::process::exit(1);
    }
}
