use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gwf_imaging::forward::InterferometricData;
use gwf_imaging::harness::checks::run_checks;
use gwf_imaging::harness::run::{build_operator, parse_seeds, parse_values, simulate, write_trace_csv};
use gwf_imaging::harness::{
    export_image, load_config, preset, run_cell, run_sweep, ExperimentConfig, FeasibilityReport,
    SweepAxis,
};
use gwf_imaging::solver::solve;
use gwf_imaging::Error;

/// Interferometric radar imaging experiments.
#[derive(Parser)]
#[command(name = "gwf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file, or `preset:active` / `preset:passive`.
    #[arg(long, value_name = "PATH")]
    config: String,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the ground truth and its interferometric data.
    Simulate(Common),
    /// Reconstruct a scene and score it against the truth.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Write the per-iteration objective and error.
        #[arg(long)]
        trace: bool,
        /// Reconstruct from a saved data CSV instead of simulating.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Run a one-parameter sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// receivers, bandwidth, center_frequency or snr.
        #[arg(long, value_name = "AXIS")]
        sweep: SweepAxis,
        /// `a,b,c` or `start:step:stop`, in config-file units.
        #[arg(long, value_name = "LIST")]
        values: String,
        /// `1,2,3` or `0..10`.
        #[arg(long, value_name = "LIST", default_value = "0")]
        seeds: String,
    },
    /// Report resolution, RIC bound and sample-complexity checks.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Constant in front of the finite-receiver RIC term.
        #[arg(long, default_value_t = 1.0)]
        order_constant: f64,
    },
    /// Check the matrix-free operator against the dense oracle on a shrunken config.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match common.config.strip_prefix("preset:") {
        Some(name) => preset(name)?,
        None => load_config(Path::new(&common.config))?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    Ok(cfg)
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn aligned(estimate: &[f64], truth: &[f64]) -> Vec<f64> {
    let dot: f64 = estimate.iter().zip(truth).map(|(a, b)| a * b).sum();
    let s = if dot < 0.0 { -1.0 } else { 1.0 };
    estimate.iter().map(|v| s * v).collect()
}

fn cmd_simulate(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let (truth, data) = simulate(&cfg, cfg.seed)?;
    export_image(&truth, &cfg.grid()?, &common.out.join("truth"))?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    write(common.out.join("data.csv"), buf)?;
    write(common.out.join("config.cfg"), cfg.to_text())?;
    println!("{} samples, |d|^2 = {:e}", data.len(), data.norm_sqr());
    Ok(())
}

fn cmd_reconstruct(common: &Common, trace: bool, data: Option<&Path>) -> Result<()> {
    let cfg = load(common)?;
    let grid = cfg.grid()?;
    if let Some(path) = data {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let data = InterferometricData::read_csv(BufReader::new(file))?;
        let op = build_operator(&cfg)?;
        let sol = solve(&data, &op, &cfg.solver(cfg.seed))?;
        export_image(sol.estimate(), &grid, &common.out.join("estimate"))?;
        println!("final objective {:e} after {} iterations", sol.final_objective(), sol.state.iteration);
        return Ok(());
    }
    let cell = run_cell(&cfg, cfg.seed, trace)?;
    export_image(&cell.truth, &grid, &common.out.join("truth"))?;
    export_image(&aligned(cell.solution.estimate(), &cell.truth), &grid, &common.out.join("estimate"))?;
    if trace {
        let mut buf = Vec::new();
        write_trace_csv(&cell.trace, &mut buf)?;
        write(common.out.join("trace.csv"), buf)?;
    }
    let summary = format!(
        "seed,aligned_mse,relative_mse,final_objective,iterations,objective_increases,init_eigenvalue\n{},{:e},{:e},{:e},{},{},{:e}\n",
        cfg.seed,
        cell.aligned_mse,
        cell.relative_mse,
        cell.solution.final_objective(),
        cell.solution.state.iteration,
        cell.solution.state.objective_increases(),
        cell.solution.init.eigenvalue,
    );
    write(common.out.join("summary.csv"), summary)?;
    println!(
        "relative MSE {:.4e} after {} iterations ({:.1} s)",
        cell.relative_mse,
        cell.solution.state.iteration,
        cell.wall_time.as_secs_f64()
    );
    Ok(())
}

fn cmd_sweep(common: &Common, axis: SweepAxis, values: &str, seeds: &str) -> Result<()> {
    let cfg = load(common)?;
    let values = parse_values(values)?;
    let seeds = parse_seeds(seeds)?;
    let result = run_sweep(&cfg, axis, &values, &seeds)?;
    write(common.out.join("sweep.csv"), result.to_csv())?;
    write(common.out.join("timing.csv"), result.timing_csv())?;
    for (value, mean, failed) in result.mean_relative_mse() {
        println!("{axis} = {value}: mean relative MSE {mean:.4e} ({failed} failed)");
    }
    Ok(())
}

fn cmd_bounds(common: &Common, order_constant: f64) -> Result<()> {
    let cfg = load(common)?;
    let report = FeasibilityReport::new(&cfg, order_constant)?;
    let text = report.to_string();
    write(common.out.join("bounds.txt"), &text)?;
    write(common.out.join("bounds.csv"), report.to_csv())?;
    print!("{text}");
    Ok(())
}

/// Oracle disagreement, reported as a numerical failure.
#[derive(Debug)]
struct ValidationFailed;

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("validation failed")
    }
}

impl std::error::Error for ValidationFailed {}

fn cmd_validate(common: &Common, trials: usize) -> Result<()> {
    let cfg = load(common)?;
    if trials == 0 {
        bail!(Error::Config("trials: must be positive".into()));
    }
    let report = run_checks(&cfg, trials, cfg.seed)?;
    write(common.out.join("validate.csv"), report.to_csv())?;
    print!("{report}");
    if !report.all_passed() {
        return Err(ValidationFailed.into());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<ValidationFailed>() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config_error() => 1,
        Some(Error::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Reconstruct { common, trace, data } => cmd_reconstruct(common, *trace, data.as_deref()),
        Command::Sweep { common, sweep, values, seeds } => cmd_sweep(common, *sweep, values, seeds),
        Command::Bounds { common, order_constant } => cmd_bounds(common, *order_constant),
        Command::Validate { common, trials } => cmd_validate(common, *trials),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
