use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fbmc_mimo::cellfree::{build_layout, fractional_power_control};
use fbmc_mimo::harness::{run_experiment, write_csv, ExperimentConfig};
use fbmc_mimo::rng::{stream, Purpose};

/// FBMC massive-MIMO uplink link-level simulator.
#[derive(Parser)]
#[command(name = "fbmc-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its metrics as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check one or more config files.
    ValidateConfig {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// List the experiment configs in a directory.
    ListExperiments {
        #[arg(long, default_value = "experiments")]
        dir: PathBuf,
    },
    /// Draw one cell-free layout and write it as CSV.
    Layout {
        #[arg(long, default_value_t = 9)]
        num_aps: usize,
        #[arg(long, default_value_t = 4)]
        antennas_per_ap: usize,
        #[arg(long, default_value_t = 4)]
        users: usize,
        #[arg(long, default_value_t = 2.0)]
        area_side_km: f64,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        #[arg(long, default_value_t = 0.2)]
        max_power_w: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            seed,
            trials,
            threads,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let threads = threads.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            });
            let rows = run_experiment(&cfg, threads)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_csv(&rows, BufWriter::new(file))?;
            eprintln!("{}: {} rows -> {}", cfg.name, rows.len(), out.display());
        }
        Command::ValidateConfig { configs } => {
            let mut failed = false;
            for path in &configs {
                match load(path) {
                    Ok(cfg) => println!("ok       {} ({})", path.display(), cfg.name),
                    Err(e) => {
                        failed = true;
                        println!("invalid  {}: {:#}", path.display(), e);
                    }
                }
            }
            if failed {
                bail!("some configs are invalid");
            }
        }
        Command::ListExperiments { dir } => {
            for path in config_files(&dir)? {
                match load(&path) {
                    Ok(cfg) => println!("{:<28} {:<10} {}", cfg.name, format!("{:?}", cfg.scenario).to_lowercase(), cfg.description),
                    Err(e) => println!("{:<28} invalid: {:#}", path.display(), e),
                }
            }
        }
        Command::Layout {
            num_aps,
            antennas_per_ap,
            users,
            area_side_km,
            nu,
            max_power_w,
            seed,
            trial,
            out,
        } => {
            let mut rng = stream(seed, Purpose::Layout, trial);
            let layout = build_layout(num_aps, antennas_per_ap, users, area_side_km, &mut rng)?;
            let pc = fractional_power_control(&layout.beta_sums(), nu, max_power_w)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            layout.write_csv(BufWriter::new(file), &pc.mu)?;
        }
    }
    Ok(())
}
