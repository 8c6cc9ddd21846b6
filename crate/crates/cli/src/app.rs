//! Command-line front end: argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use crate::config::{AlgorithmSpec, ConfigError, ExperimentConfig};
use crate::run::{self, CliError};
use crate::verify;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mtcover",
    version,
    about = "Multitask coverage, learning and regret experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by `run` and `sweep`.
#[derive(clap::Args)]
struct ExperimentArgs {
    /// JSON or TOML experiment file; the built-in firefighting scenario when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root, overriding the file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Algorithm with default parameters, overriding the file.
    #[arg(long, value_parser = ["dsmlc", "rmlc", "fmc"])]
    algo: Option<String>,
    /// Horizon for the built-in scenario.
    #[arg(long, default_value_t = 3000)]
    horizon: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Run only this seed instead of the file's list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the brute-force oracle suites and the bound checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-render the plots of a run directory from its CSVs.
    Plot {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run a contiguous range of seeds and summarize them.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        from: u64,
        /// Last seed, inclusive.
        #[arg(long)]
        to: u64,
    },
}

fn load(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::firefighting(
            AlgorithmSpec::from_name("dsmlc").expect("known name"),
            args.horizon,
        ),
    };
    if let Some(name) = &args.algo {
        if cfg.algorithm.name() != name {
            cfg.algorithm = AlgorithmSpec::from_name(name)
                .ok_or_else(|| ConfigError::new("algo", "unknown algorithm"))?;
        }
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_runs(runs: &[run::RunArtifacts]) {
    for r in runs {
        let s = &r.summary;
        println!(
            "{} seed {}: T={} cumulative regret {:.6} -> {}",
            s.algorithm,
            s.seed,
            s.t,
            s.final_cumulative_regret,
            r.dir.display()
        );
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { exp, seed } => {
            let mut cfg = load(&exp)?;
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            print_runs(&run::run_experiment(&cfg)?);
        }
        Command::Sweep { exp, from, to } => {
            if to < from {
                return Err(ConfigError::new("to", "must not be below --from").into());
            }
            let cfg = load(&exp)?;
            let seeds: Vec<u64> = (from..=to).collect();
            print_runs(&run::run_sweep(&cfg, &seeds)?);
        }
        Command::Verify { seed } => {
            let reports = verify::run_all(seed);
            let mut failed = 0;
            for r in &reports {
                println!(
                    "{} {} ({} cases)",
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.name,
                    r.cases
                );
                for f in &r.failures {
                    println!("    {f}");
                }
                failed += usize::from(!r.passed());
            }
            if failed > 0 {
                return Err(CliError::Runtime(format!("{failed} suite(s) failed")));
            }
        }
        Command::Plot { dir } => {
            for p in run::render_dir(&dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status: 0 on success, 1 for configuration or usage errors,
/// 2 for runtime failures.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // bad arguments count as configuration errors
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mtcover: {e}");
            e.exit_code()
        }
    }
}
