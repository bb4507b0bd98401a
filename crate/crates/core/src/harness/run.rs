//! Single reconstructions and parameter sweeps.

use std::fmt::Write as _;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{
    add_receiver_noise, build_measurement_vectors_with, cross_correlate, simulate_receiver_data,
    InterferometricData,
};
use crate::operator::LiftedOperator;
use crate::solver::{aligned_mse, relative_aligned_mse, solve_observed, Solution};

use super::config::{ExperimentConfig, SweepAxis};
use super::phantom::make_phantom;

/// Header of the sweep CSV. Frozen: downstream plotting relies on it.
pub const SWEEP_HEADER: &str =
    "axis,value,seed,status,aligned_mse,relative_mse,final_objective,iterations,objective_increases";

/// Header of the per-iteration trace CSV.
pub const TRACE_HEADER: &str = "iteration,objective,aligned_mse";

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for `purpose` under a base seed.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    splitmix(splitmix(seed) ^ purpose)
}

const NOISE_STREAM: u64 = 1;
const POWER_STREAM: u64 = 2;

/// Upsamples a row-major `n × n` scene by `q`, each sub-pixel carrying `1/q²` of its parent.
fn oversample(rho: &[f64], n: usize, q: usize) -> Vec<f64> {
    if q == 1 {
        return rho.to_vec();
    }
    let w = 1.0 / (q * q) as f64;
    let fine = n * q;
    let mut out = vec![0.0; fine * fine];
    for row in 0..fine {
        for col in 0..fine {
            out[row * fine + col] = rho[(row / q) * n + col / q] * w;
        }
    }
    out
}

/// Ground truth and the interferometric data it produces under `config`.
///
/// Data are synthesized on the oversampled grid and corrupted with receiver noise when
/// `snr_db` is set; `seed` drives the noise.
pub fn simulate(config: &ExperimentConfig, seed: u64) -> Result<(Vec<f64>, InterferometricData<f64>)> {
    config.validate()?;
    let truth = make_phantom(&config.scene, config.points_per_side)?;
    let spectral = config.spectral()?;
    let geometry = config.geometry()?;
    let fine_grid = config.simulation_grid()?;
    let vectors = build_measurement_vectors_with(
        &fine_grid,
        &geometry,
        &spectral,
        config.amplitude_mode,
        config.phase_model,
    )?;
    let fine = oversample(&truth, config.points_per_side, config.oversample_factor);
    let mut received = simulate_receiver_data(&fine, &vectors)?;
    if let Some(snr) = config.snr_db {
        received = add_receiver_noise(&received, snr, derive_seed(seed, NOISE_STREAM))?;
    }
    Ok((truth, cross_correlate(&received)?))
}

/// Operator on the reconstruction grid.
pub fn build_operator(config: &ExperimentConfig) -> Result<LiftedOperator<f64>> {
    let vectors = build_measurement_vectors_with(
        &config.grid()?,
        &config.geometry()?,
        &config.spectral()?,
        config.amplitude_mode,
        config.phase_model,
    )?;
    LiftedOperator::new(vectors)
}

/// `(iteration, objective, aligned_mse)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub aligned_mse: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut w: W) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{:e},{:e}", r.iteration, r.objective, r.aligned_mse)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub truth: Vec<f64>,
    pub solution: Solution<f64>,
    /// `(1/K)‖ρ − sρ̂‖²`.
    pub aligned_mse: f64,
    /// [`aligned_mse`](Self::aligned_mse) over the mean square of the truth.
    pub relative_mse: f64,
    /// Empty unless tracing was requested.
    pub trace: Vec<TraceRow>,
    pub wall_time: Duration,
}

/// Simulate, correlate, reconstruct and score one configuration.
pub fn run_cell(config: &ExperimentConfig, seed: u64, trace: bool) -> Result<CellOutcome> {
    let start = Instant::now();
    let (truth, data) = simulate(config, seed)?;
    let op = build_operator(config)?;
    let solver = config.solver(derive_seed(seed, POWER_STREAM));
    let mut rows = Vec::new();
    let solution = solve_observed(&data, &op, &solver, |k, j, rho| {
        if trace {
            rows.push(TraceRow {
                iteration: k,
                objective: j,
                aligned_mse: aligned_mse(rho, &truth),
            });
        }
    })?;
    let estimate = solution.estimate();
    Ok(CellOutcome {
        aligned_mse: aligned_mse(estimate, &truth),
        relative_mse: relative_aligned_mse(estimate, &truth),
        truth,
        solution,
        trace: rows,
        wall_time: start.elapsed(),
    })
}

/// Short machine-readable label for a failed cell.
pub fn failure_status(err: &Error) -> &'static str {
    match err {
        Error::Diverged { .. } => "diverged",
        Error::NonPositiveEigenvalue { .. } => "nonpositive_eigenvalue",
        Error::NonFinite(_) => "nonfinite",
        Error::ZeroSignal { .. } => "zero_signal",
        e if e.is_config_error() => "config_error",
        _ => "error",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Swept value in config-file units.
    pub value: f64,
    pub seed: u64,
    /// `ok` or a [`failure_status`] label.
    pub status: String,
    pub aligned_mse: f64,
    pub relative_mse: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub objective_increases: usize,
    pub wall_time: Duration,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Value-major, seeds in the order given.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Deterministic CSV ([`SWEEP_HEADER`]); failed cells carry `nan` metrics.
    pub fn to_csv(&self) -> String {
        fn sci(v: f64) -> String {
            if v.is_nan() {
                "nan".into()
            } else {
                format!("{v:e}")
            }
        }
        let mut s = String::new();
        s.push_str(SWEEP_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{},{},{},{},{},{},{}",
                self.axis,
                r.value,
                r.seed,
                r.status,
                sci(r.aligned_mse),
                sci(r.relative_mse),
                sci(r.final_objective),
                r.iterations,
                r.objective_increases
            );
        }
        s
    }

    /// Wall-clock seconds per cell, kept apart from the deterministic CSV.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("axis,value,seed,wall_time_s\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{},{:.6}",
                self.axis,
                r.value,
                r.seed,
                r.wall_time.as_secs_f64()
            );
        }
        s
    }

    /// Distinct swept values in order, each with the mean relative MSE of its successful
    /// seeds and the number of failed ones. A value whose seeds all failed has mean `+∞`.
    pub fn mean_relative_mse(&self) -> Vec<(f64, f64, usize)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !values.contains(&r.value) {
                values.push(r.value);
            }
        }
        for v in values {
            let cell: Vec<&SweepRow> = self.rows.iter().filter(|r| r.value == v).collect();
            let ok: Vec<f64> = cell.iter().filter(|r| r.is_ok()).map(|r| r.relative_mse).collect();
            let failed = cell.len() - ok.len();
            let mean = if ok.is_empty() {
                f64::INFINITY
            } else {
                ok.iter().sum::<f64>() / ok.len() as f64
            };
            out.push((v, mean, failed));
        }
        out
    }
}

fn sweep_row(config: &ExperimentConfig, axis: SweepAxis, value: f64, seed: u64) -> SweepRow {
    let start = Instant::now();
    let cell_seed = derive_seed(seed, value.to_bits());
    let outcome = config
        .with_axis_value(axis, value)
        .and_then(|cfg| run_cell(&cfg, cell_seed, false));
    match outcome {
        Ok(o) => SweepRow {
            value,
            seed,
            status: "ok".into(),
            aligned_mse: o.aligned_mse,
            relative_mse: o.relative_mse,
            final_objective: o.solution.final_objective(),
            iterations: o.solution.state.iteration,
            objective_increases: o.solution.state.objective_increases(),
            wall_time: o.wall_time,
        },
        Err(e) => SweepRow {
            value,
            seed,
            status: failure_status(&e).into(),
            aligned_mse: f64::NAN,
            relative_mse: f64::NAN,
            final_objective: f64::NAN,
            iterations: match e {
                Error::Diverged { iteration, .. } => iteration,
                _ => 0,
            },
            objective_increases: 0,
            wall_time: start.elapsed(),
        },
    }
}

/// Runs every `(value, seed)` cell. Each cell's random streams derive from its own seed
/// and value, so a cell reproduces exactly when run alone.
pub fn run_sweep(
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let cells: Vec<(f64, u64)> = values
        .iter()
        .flat_map(|v| seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(v, s)| sweep_row(config, axis, v, s))
        .collect();
    Ok(SweepResult { axis, rows })
}

/// Parses `a,b,c` or an inclusive range `start:step:stop`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("values: cannot parse `{spec}`"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let values = match parts.as_slice() {
        [single] => single
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        [start, step, stop] => {
            let (a, h, b): (f64, f64, f64) = (
                start.parse().map_err(|_| bad())?,
                step.parse().map_err(|_| bad())?,
                stop.parse().map_err(|_| bad())?,
            );
            if !(h > 0.0) || b < a {
                return Err(bad());
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            (0..count).map(|i| a + i as f64 * h).collect()
        }
        _ => return Err(bad()),
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

/// Parses `1,2,3` or a half-open count `0..10`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("seeds: cannot parse `{spec}`"));
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b <= a {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    spec.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| bad()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::preset;

    fn small() -> ExperimentConfig {
        let mut c = preset("active").unwrap();
        c.points_per_side = 3;
        c.scene_side = 7.2;
        c.receivers = 8;
        c.freq_samples = 16;
        c.iterations = 300;
        c.step_size = 0.2;
        c
    }

    #[test]
    fn small_cell_recovers() {
        let o = run_cell(&small(), 1, true).unwrap();
        assert!(o.relative_mse < 1e-3, "{}", o.relative_mse);
        assert_eq!(o.trace.len(), 301);
        assert_eq!(o.trace[0].iteration, 0);
    }

    #[test]
    fn oversampling_preserves_coarse_sums() {
        let rho = vec![1.0, 2.0, 3.0, 4.0];
        let fine = oversample(&rho, 2, 3);
        assert_eq!(fine.len(), 36);
        assert!((fine.iter().sum::<f64>() - 10.0).abs() < 1e-12);
        assert_eq!(fine[0] * 9.0, 1.0);
        assert_eq!(fine[35] * 9.0, 4.0);
    }

    #[test]
    fn single_value_single_seed_gives_one_row() {
        let r = run_sweep(&small(), SweepAxis::Receivers, &[6.0], &[3]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn isolated_cell_matches_sweep_row() {
        let mut c = small();
        c.iterations = 50;
        let full = run_sweep(&c, SweepAxis::Snr, &[0.0, 10.0, 20.0], &[4, 5]).unwrap();
        let alone = run_sweep(&c, SweepAxis::Snr, &[10.0], &[5]).unwrap();
        let row = full.rows.iter().find(|r| r.value == 10.0 && r.seed == 5).unwrap();
        assert_eq!(row.relative_mse, alone.rows[0].relative_mse);
        let again = run_sweep(&c, SweepAxis::Snr, &[0.0, 10.0, 20.0], &[4, 5]).unwrap();
        assert_eq!(full.to_csv(), again.to_csv());
    }

    #[test]
    fn failures_become_rows() {
        let mut c = small();
        c.step_size = 500.0;
        let r = run_sweep(&c, SweepAxis::Receivers, &[8.0, 1.0], &[0]).unwrap();
        assert_eq!(r.rows[0].status, "diverged");
        assert_eq!(r.rows[1].status, "config_error");
        assert!(r.to_csv().contains("nan"));
        let means = r.mean_relative_mse();
        assert_eq!(means[0].1, f64::INFINITY);
        assert_eq!(means[0].2, 1);
    }

    #[test]
    fn value_and_seed_lists() {
        assert_eq!(parse_values("6:2:12").unwrap(), vec![6.0, 8.0, 10.0, 12.0]);
        assert_eq!(parse_values("-20:5:30").unwrap().len(), 11);
        assert_eq!(parse_values("1e9, 2e9").unwrap(), vec![1e9, 2e9]);
        assert!(parse_values("").is_err());
        assert!(parse_values("3:0:5").is_err());
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("7,9").unwrap(), vec![7, 9]);
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn trace_csv_format() {
        let mut buf = Vec::new();
        let rows = [TraceRow {
            iteration: 0,
            objective: 2.5,
            aligned_mse: 0.125,
        }];
        write_trace_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,objective,aligned_mse\n0,2.5e0,1.25e-1\n");
    }
}
