use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nd_cli::commands::{
    compare_report, sim_report, sweep_report, theory_report, write_compare, write_sim, write_sweep,
    write_theory,
};
use nd_cli::specs::{read_json, CompareSpec, SeedOverride, SweepSpec};
use nd_cli::{CliError, CliResult};
use nd_core::phy::UnpackCache;
use nd_core::SimConfig;

/// Directional neighbor discovery simulator and analysis.
#[derive(Debug, Parser)]
#[command(name = "ndsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON input file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Number of seeds, overriding the file (base seed from ND_SEED_BASE or the file).
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one config over its seeds: curve.csv, summary.json.
    Sim(Common),
    /// Closed-form analysis of one config: theory.csv, theory.json.
    Theory(Common),
    /// Grid of configs from a sweep file: results.csv, sweep.json.
    Sweep(Common),
    /// Theory vs simulation and SIC / MPR reductions: overlay.csv,
    /// reductions.csv, compare.json.
    Compare(Common),
}

fn setup(common: &Common) -> CliResult<SeedOverride> {
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Parse {
                path: "--jobs".into(),
                message: e.to_string(),
            })?;
    }
    SeedOverride::from_env(common.seeds)
}

fn load_config(common: &Common, seeds: SeedOverride) -> CliResult<SimConfig> {
    let mut config: SimConfig = read_json(&common.config)?;
    seeds.apply(&mut config);
    Ok(config)
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Sim(c) => {
            let seeds = setup(&c)?;
            let config = load_config(&c, seeds)?;
            write_sim(&sim_report(&config)?, &c.out)
        }
        Command::Theory(c) => {
            let seeds = setup(&c)?;
            let config = load_config(&c, seeds)?;
            write_theory(&theory_report(&config, &UnpackCache::new())?, &c.out)
        }
        Command::Sweep(c) => {
            let seeds = setup(&c)?;
            let mut spec: SweepSpec = read_json(&c.config)?;
            seeds.apply(&mut spec.base);
            write_sweep(&sweep_report(&spec)?, &c.out)
        }
        Command::Compare(c) => {
            let seeds = setup(&c)?;
            let mut spec: CompareSpec = read_json(&c.config)?;
            seeds.apply(&mut spec.base);
            write_compare(&compare_report(&spec, &UnpackCache::new())?, &c.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
