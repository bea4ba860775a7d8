//! `gapmin` command-line runner.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gapmin::datagen::save_csv;
use gapmin::gaptheory::instance_gap;
use gapmin::harness::{run_experiment, split_problem, sweep, write_outputs, ExperimentConfig, Manifest, RunOutput, SweepAxis};
use gapmin::model::WeightVector;
use gapmin::verify::{run_all, SuiteOutcome};
use gapmin::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const GAP_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "gapmin", version, about = "Gap-minimizing transfer learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the source and target samples of a configured problem as CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every (fraction, algorithm, seed) cell of a configuration.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a configuration once per grid value of one hyperparameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// rho-s, rho-t, rho-joint, gamma-max or target-fraction.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        grid: Vec<f64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the instance-weighting gap report for uniform weights on one split.
    Gap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
    },
    /// Run the randomized bound suites.
    Verify {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Judge the multi-task suites by the certified triangle-form bounds.
        #[arg(long)]
        certified: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or `results`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let cfg = ExperimentConfig::load(&self.config)?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("results"));
        Ok((cfg, out))
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } => EXIT_CONFIG,
            Error::BoundViolation { .. } => EXIT_INVARIANT,
            _ => EXIT_FAILURE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn invariant(message: String) -> Failure {
    Failure {
        code: EXIT_INVARIANT,
        message,
    }
}

fn print_aggregates(out: &RunOutput) {
    println!("{:<16} {:>9} {:>10} {:>10} {:>10}", "algorithm", "fraction", "axis", "mean", "stderr");
    for r in &out.aggregates {
        let axis = r.axis_value.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<16} {:>9.3} {:>10} {:>10.4} {:>10.4}",
            r.algorithm, r.target_fraction, axis, r.mean, r.stderr
        );
    }
}

fn generate(common: &Common, seed: u64) -> Result<(), Failure> {
    let (cfg, out) = common.load()?;
    let problem = cfg.problem.generate(seed)?;
    std::fs::create_dir_all(&out).map_err(Error::from)?;
    save_csv(&problem.target, out.join("target.csv"))?;
    if let Some(source) = &problem.source {
        save_csv(source, out.join("source.csv"))?;
    }
    println!("wrote {} target and {} source rows to {}", problem.target.len(), problem.source.as_ref().map_or(0, |s| s.len()), out.display());
    Ok(())
}

fn run(common: &Common, jobs: Option<usize>) -> Result<(), Failure> {
    let (cfg, out) = common.load()?;
    let result = run_experiment(&cfg, jobs)?;
    let manifest = Manifest {
        config: cfg,
        axis: None,
        grid: Vec::new(),
        n_records: result.records.len(),
    };
    write_outputs(&out, &result, &manifest)?;
    print_aggregates(&result);
    Ok(())
}

fn run_sweep(common: &Common, axis: SweepAxis, grid: &[f64], jobs: Option<usize>) -> Result<(), Failure> {
    let (cfg, out) = common.load()?;
    let result = sweep(&cfg, axis, grid, jobs)?;
    let manifest = Manifest {
        config: cfg,
        axis: Some(axis),
        grid: grid.to_vec(),
        n_records: result.records.len(),
    };
    write_outputs(&out, &result, &manifest)?;
    print_aggregates(&result);
    Ok(())
}

fn gap(common: &Common, seed: u64, eta: f64) -> Result<(), Failure> {
    let (cfg, _) = common.load()?;
    cfg.validate()?;
    let problem = cfg.problem.generate(seed)?;
    let split = split_problem(&problem, cfg.target_fractions[0], seed, cfg.standardize)?;
    let spec = cfg.base.resolve(cfg.problem.mode())?;
    let gamma = WeightVector::uniform(split.train.len(), split.source.len())?;
    let report = instance_gap(&split.train, &split.source, &gamma, &spec, eta)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    if !report.gaps_nonnegative(GAP_TOL) {
        return Err(invariant(format!("negative gap component: {} / {}", report.nabla_s, report.nabla_t)));
    }
    if report.exact && !report.bound_holds(GAP_TOL) {
        return Err(invariant(format!("norm bound violated by {}", -report.slack)));
    }
    Ok(())
}

fn verify(trials: usize, seed: u64, certified: bool, out: Option<&Path>) -> Result<(), Failure> {
    let outcomes = run_all(trials, seed)?;
    println!(
        "{:<20} {:>7} {:>10} {:>12} {:>10} {:>12} {:>12}",
        "suite", "trials", "violated", "min slack", "cert. viol", "cert. slack", "min gap"
    );
    for o in &outcomes {
        println!(
            "{:<20} {:>7} {:>10} {:>12.3e} {:>10} {:>12.3e} {:>12.3e}",
            o.suite.name(),
            o.trials,
            o.violations,
            o.min_slack,
            o.certified_violations,
            o.min_certified_slack,
            o.min_gap
        );
    }
    if let Some(path) = out {
        std::fs::create_dir_all(path).map_err(Error::from)?;
        let text = serde_json::to_string_pretty(&outcomes).map_err(Error::from)?;
        std::fs::write(path.join("verify.json"), text).map_err(Error::from)?;
    }
    let failed: Vec<&SuiteOutcome> = outcomes
        .iter()
        .filter(|o| !if certified { o.certified_passed() } else { o.passed() })
        .collect();
    if failed.is_empty() {
        return Ok(());
    }
    let names: Vec<&str> = failed.iter().map(|o| o.suite.name()).collect();
    Err(invariant(format!("bound violations in {}", names.join(", "))))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { common, seed } => generate(common, *seed),
        Command::Run { common, jobs } => run(common, *jobs),
        Command::Sweep {
            common,
            axis,
            grid,
            jobs,
        } => run_sweep(common, *axis, grid, *jobs),
        Command::Gap { common, seed, eta } => gap(common, *seed, *eta),
        Command::Verify {
            trials,
            seed,
            certified,
            out,
        } => verify(*trials, *seed, *certified, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
