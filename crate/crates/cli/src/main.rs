use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use driftrelax::sampler::{sample_conditional_path, ConditionalProblem, RelaxationLadder};
use driftrelax::sde::SdeModel;
use driftrelax::streams::{StreamFactory, StreamPhase};

use driftrelax_cli::bench::{
    run_benchmark_with, run_filter, FilterVariant, ObservationSequence,
};
use driftrelax_cli::config::{load_config, BenchmarkConfig, ConfigError};
use driftrelax_cli::plot::emit_plot;
use driftrelax_cli::report::{format_g17, write_csv, write_manifest};

#[derive(Parser)]
#[command(
    name = "driftrelax",
    version,
    about = "Conditional path sampling of SDEs and particle-filter benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both filters over the double-well observations; write two
    /// CSVs, a comparison SVG and a run manifest into --out-dir.
    Benchmark {
        /// Key-value config file (missing keys take the defaults).
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if absent.
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulate observations from a hidden trajectory instead of
        /// using the fixed alternating sequence.
        #[arg(long)]
        simulate_truth: bool,
    },
    /// Draw standalone conditional-path samples and write one endpoint
    /// per run.
    SamplePath {
        #[arg(long)]
        config: PathBuf,
        /// Fixed start point of every path.
        #[arg(long)]
        x0: f64,
        /// Endpoint observation to condition on.
        #[arg(long)]
        z: f64,
        /// Number of independent sampler runs.
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        /// Output CSV of endpoint samples.
        #[arg(long, default_value = "endpoints.csv")]
        out: PathBuf,
        /// Target dynamics for the conditioning problem.
        #[arg(long, value_enum, default_value_t = DriftKind::DoubleWell)]
        drift: DriftKind,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a single filter over the observations and write its CSV.
    Filter {
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Generic,
    Mcmc,
}

#[derive(Clone, Copy, ValueEnum)]
enum DriftKind {
    /// Double-well target with the shallow-well base drift.
    DoubleWell,
    /// Pure diffusion for both base and target.
    Zero,
}

enum CliError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o failure: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<BenchmarkConfig, CliError> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Benchmark {
            config,
            out_dir,
            seed,
            simulate_truth,
        } => {
            let cfg = load(&config, seed)?;
            let config_source = std::fs::read(&config)?;
            let observations = if simulate_truth {
                ObservationSequence::simulated(&cfg)
                    .map_err(|e| CliError::Runtime(format!("truth simulation failed: {e}")))?
            } else {
                ObservationSequence::alternating(cfg.n_obs)
            };
            let output = run_benchmark_with(&cfg, &observations)
                .map_err(|e| CliError::Runtime(e.to_string()))?;

            std::fs::create_dir_all(&out_dir)?;
            write_csv(&output.generic, &out_dir.join("generic.csv"))?;
            write_csv(&output.mcmc, &out_dir.join("mcmc.csv"))?;
            emit_plot(
                &output.generic,
                &output.mcmc,
                &observations,
                &out_dir.join("plot.svg"),
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            write_manifest(&cfg, &config_source, &out_dir.join("manifest.txt"))?;

            println!("seed {}", cfg.seed);
            println!(" k     z    generic mean   mcmc mean   generic ess%   mcmc ess%");
            for (g, m) in output.generic.iter().zip(&output.mcmc) {
                println!(
                    "{:>2}  {:>4}  {:>13.4}  {:>10.4}  {:>13.4}  {:>10.4}",
                    g.k,
                    g.z,
                    g.post_mean,
                    m.post_mean,
                    g.ess_pct(),
                    m.ess_pct()
                );
            }
            println!("wrote generic.csv, mcmc.csv, plot.svg, manifest.txt to {}", out_dir.display());
            Ok(())
        }

        Command::SamplePath {
            config,
            x0,
            z,
            runs,
            out,
            drift,
            seed,
        } => {
            let cfg = load(&config, seed)?;
            if runs == 0 {
                return Err(CliError::Runtime("--runs must be positive".into()));
            }
            let rt = |e: driftrelax::Error| CliError::Runtime(e.to_string());
            let (base, target) = match drift {
                DriftKind::DoubleWell => (
                    SdeModel::scaled_well(cfg.alpha, cfg.sigma).map_err(rt)?,
                    SdeModel::double_well(cfg.sigma).map_err(rt)?,
                ),
                DriftKind::Zero => (
                    SdeModel::zero_drift(cfg.sigma).map_err(rt)?,
                    SdeModel::zero_drift(cfg.sigma).map_err(rt)?,
                ),
            };
            let problem =
                ConditionalProblem::new(x0, z, cfg.obs_var, base, target, cfg.steps_per_obs, cfg.dt)
                    .map_err(rt)?;
            let ladder = RelaxationLadder::uniform(cfg.levels);
            let streams = StreamFactory::new(cfg.seed);

            let endpoints: Result<Vec<f64>, driftrelax::Error> = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let mut rng = streams.stream(StreamPhase::Standalone, 0, r);
                    sample_conditional_path(&problem, &ladder, &cfg.hmc, None, &mut rng)
                        .map(|(_, trajectory, _)| trajectory.endpoint())
                })
                .collect();
            let endpoints = endpoints.map_err(rt)?;

            let mut csv = String::from("run,endpoint\n");
            for (r, e) in endpoints.iter().enumerate() {
                csv.push_str(&format!("{r},{}\n", format_g17(*e)));
            }
            std::fs::write(&out, csv)?;

            let n = endpoints.len() as f64;
            let mean = endpoints.iter().sum::<f64>() / n;
            let var = endpoints.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
            println!("runs {runs}");
            println!("endpoint mean {mean}");
            println!("endpoint variance {var}");
            println!("wrote {}", out.display());
            Ok(())
        }

        Command::Filter {
            variant,
            config,
            out,
            seed,
        } => {
            let cfg = load(&config, seed)?;
            let variant = match variant {
                Variant::Generic => FilterVariant::Generic,
                Variant::Mcmc => FilterVariant::Mcmc,
            };
            let observations = ObservationSequence::alternating(cfg.n_obs);
            let records = run_filter(variant, &cfg, &observations)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            write_csv(&records, &out)?;
            for r in &records {
                println!(
                    "k {:>2}  z {:>4}  mean {:>9.4}  ess% {:>8.4}",
                    r.k,
                    r.z,
                    r.post_mean,
                    r.ess_pct()
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
