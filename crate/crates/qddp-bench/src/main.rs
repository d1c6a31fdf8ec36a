use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qddp_bench::config::{load_config, resolve, CliOverrides, ConfigFile, ResolvedExperiment};
use qddp_bench::experiment::{emit_artifacts, run_experiment, summary_table};

/// Exit codes: 0 success, 1 config error, 2 solver hard-failure in all
/// trials.
const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;

#[derive(Parser)]
#[command(name = "qddp-bench", version, about = "Trajectory-optimization benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run(RunArgs),
    /// Check config admissibility (including the q range for the chosen
    /// system) and exit 0/1 without running anything.
    Validate(CommonArgs),
    /// Run the Cartesian product of --alpha and --q values, one
    /// experiment subdirectory per combination.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario/experiment config file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Algorithms to run, overriding the config file.
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<String>>,
    /// Entropy temperature override.
    #[arg(long)]
    alpha: Option<f64>,
    /// Entropic index override.
    #[arg(long)]
    q: Option<f64>,
    /// Mode count override.
    #[arg(long)]
    modes: Option<usize>,
    /// Sampling period override.
    #[arg(long)]
    sample_every: Option<usize>,
    /// Iteration count override.
    #[arg(long)]
    iters: Option<usize>,
    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed override; trial k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory; each (α, q) pair gets a subdirectory.
    #[arg(long)]
    out: PathBuf,
    /// α values for the sweep grid.
    #[arg(long = "alphas", value_delimiter = ',', default_values_t = [1.0, 10.0, 20.0])]
    alphas: Vec<f64>,
    /// q values for the sweep grid; defaults to the single config value.
    #[arg(long = "qs", value_delimiter = ',')]
    qs: Option<Vec<f64>>,
}

impl CommonArgs {
    fn overrides(&self) -> CliOverrides {
        CliOverrides {
            algorithms: self.algo.clone(),
            alpha: self.alpha,
            q: self.q,
            modes: self.modes,
            sample_every: self.sample_every,
            iters: self.iters,
            trials: self.trials,
            seed: self.seed,
        }
    }

    fn load_and_resolve(&self) -> Result<(ConfigFile, ResolvedExperiment), u8> {
        let file = load_config(&self.scenario).map_err(|e| {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        })?;
        let resolved = resolve(&file, &self.overrides()).map_err(|e| {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        })?;
        Ok((file, resolved))
    }
}

fn execute(resolved: &ResolvedExperiment, out: &PathBuf) -> Result<(), u8> {
    let records = run_experiment(resolved);
    emit_artifacts(resolved, &records, out).map_err(|e| {
        eprintln!("config error: {e}");
        EXIT_CONFIG
    })?;
    print!("{}", summary_table(resolved, &records));
    println!("artifacts: {}", out.display());
    if records.iter().all(|r| r.final_cost.is_none()) {
        eprintln!("solver failure: no trial completed");
        return Err(EXIT_SOLVER);
    }
    Ok(())
}

fn real_main() -> Result<(), u8> {
    let cli = Cli::try_parse().map_err(|e| {
        // Usage problems are config errors; --help/--version are success.
        let _ = e.print();
        match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                return 0;
            }
            _ => EXIT_CONFIG,
        }
    });
    let cli = match cli {
        Ok(c) => c,
        Err(0) => return Ok(()),
        Err(code) => return Err(code),
    };

    match cli.command {
        Command::Run(args) => {
            let (_, resolved) = args.common.load_and_resolve()?;
            execute(&resolved, &args.out)
        }
        Command::Validate(args) => {
            let (_, resolved) = args.load_and_resolve()?;
            println!(
                "config ok: system={}, algorithms={}",
                resolved.scenario.system,
                resolved
                    .algorithms
                    .iter()
                    .map(|a| a.name.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let (file, base) = args.common.load_and_resolve()?;
            let qs = args.qs.clone().unwrap_or_else(|| {
                let mut v: Vec<f64> = base.algorithms.iter().map(|a| a.q).collect();
                v.dedup();
                v
            });
            let mut any_ok = false;
            for &alpha in &args.alphas {
                for &qv in &qs {
                    let mut overrides = args.common.overrides();
                    overrides.alpha = Some(alpha);
                    overrides.q = Some(qv);
                    let resolved = resolve(&file, &overrides).map_err(|e| {
                        eprintln!("config error (alpha={alpha}, q={qv}): {e}");
                        EXIT_CONFIG
                    })?;
                    let out = args.out.join(format!("alpha_{alpha}_q_{qv}"));
                    println!("== alpha={alpha}, q={qv} ==");
                    match execute(&resolved, &out) {
                        Ok(()) => any_ok = true,
                        Err(code) if code == EXIT_SOLVER => {}
                        Err(code) => return Err(code),
                    }
                }
            }
            if any_ok {
                Ok(())
            } else {
                Err(EXIT_SOLVER)
            }
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
