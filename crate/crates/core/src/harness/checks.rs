//! Consistency checks of the matrix-free operator and solver against the dense oracle,
//! run on a shrunken copy of a configuration.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::oracle::{build_dense, dense_backprojection, dense_forward, dense_spectral, DENSE_BUDGET};
use crate::solver::{gradient, objective, spectral_initialize, SolverConfig};

use super::config::ExperimentConfig;
use super::run::{build_operator, simulate};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst relative discrepancy observed.
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,error,tolerance,passed\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{:e},{:e},{}", c.name, c.error, c.tolerance, c.passed());
        }
        s
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed() { "ok  " } else { "FAIL" };
            writeln!(f, "{mark} {:<30} {:.3e} (tol {:.0e})", c.name, c.error, c.tolerance)?;
        }
        Ok(())
    }
}

/// Same spacing and geometry, at most 3×3 pixels, 5 receivers and 8 frequencies.
pub fn shrink(config: &ExperimentConfig) -> ExperimentConfig {
    let mut c = config.clone();
    let spacing = c.scene_side / c.points_per_side as f64;
    c.points_per_side = c.points_per_side.min(3);
    c.scene_side = spacing * c.points_per_side as f64;
    c.receivers = c.receivers.clamp(2, 5);
    c.freq_samples = c.freq_samples.min(8);
    c.oversample_factor = 1;
    c.snr_db = None;
    if c.scene.starts_with("pgm:") {
        c.scene = "blocks".into();
    }
    c
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Runs every check on [`shrink`]`(config)` with `trials` random vectors each.
pub fn run_checks(config: &ExperimentConfig, trials: usize, seed: u64) -> Result<CheckReport> {
    let cfg = shrink(config);
    let op = build_operator(&cfg)?;
    let dense = build_dense(&op, DENSE_BUDGET)?;
    let k = op.pixels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };

    let (_, data) = simulate(&cfg, seed)?;

    let mut forward = 0.0f64;
    let mut adjoint = 0.0f64;
    let mut backprojection = 0.0f64;
    let mut grad = 0.0f64;
    for _ in 0..trials {
        let rho = gauss(k);
        let r = DVector::from_column_slice(&rho);
        let fast = op.forward_rank1(&rho)?;
        let slow = dense_forward(&dense, &(&r * r.transpose()))?;
        let diff: f64 = fast.values().iter().zip(&slow).map(|(a, b)| (a - b).norm_sqr()).sum();
        forward = forward.max((diff / fast.norm_sqr()).sqrt());

        let e: Vec<Complex64> = gauss(2 * op.data_len())
            .chunks(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        let lhs: f64 = fast.values().iter().zip(&e).map(|(a, b)| (a.conj() * b).re).sum();
        let applied = op.adjoint_apply(&e, &rho)?;
        let rhs: f64 = rho.iter().zip(&applied).map(|(a, b)| a * b).sum();
        adjoint = adjoint.max(rel(rhs, lhs));

        let x = dense_backprojection(&dense, &e)?;
        let want = &x * &r;
        let num: f64 = applied.iter().zip(want.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        backprojection = backprojection.max((num / want.norm_squared()).sqrt());

        let h = gauss(k);
        let g = gradient(&rho, &data, &op)?;
        let eps = 1e-5;
        let shifted = |t: f64| -> Vec<f64> { rho.iter().zip(&h).map(|(a, b)| a + t * b).collect() };
        let fd = (objective(&shifted(eps), &data, &op)? - objective(&shifted(-eps), &data, &op)?)
            / (2.0 * eps);
        let analytic: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
        grad = grad.max(rel(fd, analytic));
    }

    let solver = SolverConfig {
        power_iterations: 5000,
        power_tolerance: 1e-12,
        seed,
        ..cfg.solver(seed)
    };
    let init = spectral_initialize(&data, &op, &solver)?;
    let x = dense_backprojection(&dense, data.values())?;
    let spectrum = dense_spectral(&DMatrix::from_fn(k, k, |a, b| x[(a, b)]))?;
    let eigen = rel(init.eigenvalue, spectrum.values[0]);

    Ok(CheckReport {
        checks: vec![
            Check { name: "forward vs dense", error: forward, tolerance: 1e-12 },
            Check { name: "adjoint identity", error: adjoint, tolerance: 1e-10 },
            Check { name: "backprojection vs dense", error: backprojection, tolerance: 1e-10 },
            Check { name: "gradient vs finite difference", error: grad, tolerance: 1e-5 },
            Check { name: "power iteration vs dense", error: eigen, tolerance: 1e-6 },
        ],
    })
}
