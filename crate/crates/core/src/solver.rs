//! Generalized Wirtinger Flow over real reflectivities: spectral initialization by power
//! iteration on the backprojected lifted estimate, then fixed-step gradient descent on
//! `J(ρ) = ½‖F(ρρᵀ) - d‖²`.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::forward::InterferometricData;
use crate::operator::LiftedOperator;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub max_iterations: usize,
    /// Normalized step `μ`; the actual step is `μ / ‖ρ₀‖²`.
    pub step_size: T,
    pub power_iterations: usize,
    pub power_tolerance: T,
    /// Stop once `J(ρ_k) / (½‖d‖²)` drops below this value. Zero disables the check.
    pub convergence_tolerance: T,
    /// Abort once the objective exceeds this multiple of its initial value.
    pub divergence_factor: T,
    /// Seeds the power-iteration start vector.
    pub seed: u64,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 4000,
            step_size: T::lit(0.2),
            power_iterations: 200,
            power_tolerance: T::lit(1e-9),
            convergence_tolerance: T::zero(),
            divergence_factor: T::lit(1e3),
            seed: 0,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > T::zero()) || !self.step_size.is_finite() {
            return Err(Error::invalid("step_size", "must be positive and finite"));
        }
        if self.power_iterations == 0 {
            return Err(Error::invalid("power_iterations", "must be positive"));
        }
        if !(self.power_tolerance > T::zero()) {
            return Err(Error::invalid("power_tolerance", "must be positive"));
        }
        if self.convergence_tolerance < T::zero() {
            return Err(Error::invalid("convergence_tolerance", "must be non-negative"));
        }
        if !(self.divergence_factor > T::one()) {
            return Err(Error::invalid("divergence_factor", "must exceed 1"));
        }
        Ok(())
    }
}

/// Leading eigenpair of the backprojected estimate and the scaled initial iterate.
#[derive(Debug, Clone)]
pub struct SpectralInit<T> {
    pub eigenvalue: T,
    /// Unit-norm leading eigenvector.
    pub eigenvector: Vec<T>,
    /// `sqrt(λ₀) v`.
    pub rho0: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub iterate: Vec<T>,
    /// `‖ρ₀‖²`, the step normalization.
    pub init_norm: T,
    /// `J(ρ_k)` for `k = 0..=iteration`.
    pub objective_history: Vec<T>,
    pub iteration: usize,
}

impl<T: Real> SolverState<T> {
    /// Number of steps that raised the objective; nonzero flags a step size that is too large.
    pub fn objective_increases(&self) -> usize {
        self.objective_history
            .windows(2)
            .filter(|w| w[1] > w[0])
            .count()
    }
}

/// Outcome of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub init: SpectralInit<T>,
    pub state: SolverState<T>,
}

impl<T: Real> Solution<T> {
    pub fn estimate(&self) -> &[T] {
        &self.state.iterate
    }

    pub fn final_objective(&self) -> T {
        *self.state.objective_history.last().expect("history holds J(ρ₀)")
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn normalize<T: Real>(v: &mut [T]) -> T {
    let n = dot(v, v).sqrt();
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Power iteration on `v ↦ X̂v + shift·v`; returns (unit vector, iterations, converged).
fn power_iterate<T: Real>(
    apply: &dyn Fn(&[T]) -> Result<Vec<T>>,
    mut v: Vec<T>,
    shift: T,
    max_iter: usize,
    tol: T,
) -> Result<(Vec<T>, usize, bool)> {
    for it in 1..=max_iter {
        let mut w = apply(&v)?;
        w.iter_mut().zip(&v).for_each(|(a, b)| *a += shift * *b);
        if normalize(&mut w) == T::zero() {
            return Ok((v, it, true));
        }
        // the iteration map may flip sign each step for negative dominant eigenvalues
        let sign = if dot(&w, &v) < T::zero() { -T::one() } else { T::one() };
        let change = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (*a - sign * *b) * (*a - sign * *b))
            .sum::<T>()
            .sqrt();
        v = w;
        if !change.is_finite() {
            return Err(Error::NonFinite("power iteration"));
        }
        if change < tol {
            return Ok((v, it, true));
        }
    }
    Ok((v, max_iter, false))
}

/// Leading (largest algebraic) eigenpair of `X̂ = P_S(Re{F^H(d)})` by matrix-free power
/// iteration. Fails when that eigenvalue is not positive.
pub fn spectral_initialize<T: Real>(
    d: &InterferometricData<T>,
    op: &LiftedOperator<T>,
    config: &SolverConfig<T>,
) -> Result<SpectralInit<T>> {
    if d.values().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("interferometric data"));
    }
    let k = op.pixels();
    let apply = |v: &[T]| op.backprojection_matvec(d, v);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut v0: Vec<T> = (0..k)
        .map(|_| T::lit(StandardNormal.sample(&mut rng)))
        .collect();
    normalize(&mut v0);

    let (mut v, mut iterations, mut converged) = power_iterate(
        &apply,
        v0,
        T::zero(),
        config.power_iterations,
        config.power_tolerance,
    )?;
    let rayleigh = |v: &[T]| -> Result<(T, T)> {
        let xv = apply(v)?;
        Ok((dot(v, &xv), dot(&xv, &xv).sqrt()))
    };
    let (mut eigenvalue, radius) = rayleigh(&v)?;
    if !converged || eigenvalue <= T::zero() {
        // shift by the observed spectral radius so the largest algebraic eigenvalue dominates
        let shift = radius * T::lit(1.01);
        let (w, extra, ok) = power_iterate(
            &apply,
            v,
            shift,
            config.power_iterations,
            config.power_tolerance,
        )?;
        v = w;
        iterations += extra;
        converged = ok;
        eigenvalue = rayleigh(&v)?.0;
    }
    if !(eigenvalue > T::zero()) {
        return Err(Error::NonPositiveEigenvalue {
            eigenvalue: eigenvalue.as_f64(),
        });
    }
    let root = eigenvalue.sqrt();
    let rho0 = v.iter().map(|x| *x * root).collect();
    Ok(SpectralInit {
        eigenvalue,
        eigenvector: v,
        rho0,
        iterations,
        converged,
    })
}

fn residual<T: Real>(forward: &[Complex<T>], d: &InterferometricData<T>) -> Vec<Complex<T>> {
    forward.iter().zip(d.values()).map(|(f, y)| f - y).collect()
}

fn half_norm_sqr<T: Real>(e: &[Complex<T>]) -> T {
    e.iter().map(|v| v.norm_sqr()).sum::<T>() * T::half()
}

fn check_shapes<T: Real>(rho: &[T], d: &InterferometricData<T>, op: &LiftedOperator<T>) -> Result<()> {
    if rho.len() != op.pixels() {
        return Err(Error::DimensionMismatch {
            context: "reflectivity length",
            expected: op.pixels(),
            got: rho.len(),
        });
    }
    if d.len() != op.data_len() || d.receivers() != op.receivers() {
        return Err(Error::DimensionMismatch {
            context: "interferometric data length",
            expected: op.data_len(),
            got: d.len(),
        });
    }
    Ok(())
}

/// `J(ρ) = ½‖F(ρρᵀ) - d‖²`.
pub fn objective<T: Real>(rho: &[T], d: &InterferometricData<T>, op: &LiftedOperator<T>) -> Result<T> {
    check_shapes(rho, d, op)?;
    let (f, _) = op.forward_with_terms(rho);
    Ok(half_norm_sqr(&residual(&f, d)))
}

/// Gradient of `J` over real `ρ`: `2 P_S(Re{F^H(e)}) ρ` with `e = F(ρρᵀ) - d`.
pub fn gradient<T: Real>(rho: &[T], d: &InterferometricData<T>, op: &LiftedOperator<T>) -> Result<Vec<T>> {
    check_shapes(rho, d, op)?;
    let (f, terms) = op.forward_with_terms(rho);
    let e = residual(&f, d);
    let mut g = op.adjoint_with_terms(&e, &terms);
    g.iter_mut().for_each(|x| *x *= T::two());
    Ok(g)
}

/// Spectral initialization followed by [`descend`].
pub fn solve<T: Real>(
    d: &InterferometricData<T>,
    op: &LiftedOperator<T>,
    config: &SolverConfig<T>,
) -> Result<Solution<T>> {
    solve_observed(d, op, config, |_, _, _| {})
}

/// [`solve`] with a per-iteration observer `(k, J(ρ_k), ρ_k)`.
pub fn solve_observed<T: Real>(
    d: &InterferometricData<T>,
    op: &LiftedOperator<T>,
    config: &SolverConfig<T>,
    observer: impl FnMut(usize, T, &[T]),
) -> Result<Solution<T>> {
    config.validate()?;
    let init = spectral_initialize(d, op, config)?;
    let state = descend(init.rho0.clone(), d, op, config, observer)?;
    Ok(Solution { init, state })
}

/// Fixed-step descent `ρ_{k+1} = ρ_k - (μ/‖ρ₀‖²) P_S(Re{F^H(e_k)}) ρ_k` from a given start.
///
/// The update direction is half of [`gradient`], the Wirtinger-flow convention under which
/// `μ ≈ 0.2` is a stable step. The observer sees every evaluated iterate, including `ρ₀`
/// and the returned one.
pub fn descend<T: Real>(
    rho0: Vec<T>,
    d: &InterferometricData<T>,
    op: &LiftedOperator<T>,
    config: &SolverConfig<T>,
    mut observer: impl FnMut(usize, T, &[T]),
) -> Result<SolverState<T>> {
    config.validate()?;
    check_shapes(&rho0, d, op)?;
    let init_norm = dot(&rho0, &rho0);
    if !(init_norm > T::zero()) {
        return Err(Error::invalid("rho0", "initial iterate must be nonzero"));
    }
    let step = config.step_size / init_norm;
    let data_energy = half_norm_sqr(d.values());
    let mut rho = rho0;
    let mut history = Vec::with_capacity(config.max_iterations + 1);
    let mut limit = T::infinity();
    let mut iteration = 0;
    loop {
        let (f, terms) = op.forward_with_terms(&rho);
        let e = residual(&f, d);
        let j = half_norm_sqr(&e);
        if !j.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        if iteration == 0 {
            limit = j * config.divergence_factor;
        } else if j > limit {
            return Err(Error::Diverged {
                iteration,
                objective: j.as_f64(),
                limit: limit.as_f64(),
            });
        }
        history.push(j);
        observer(iteration, j, &rho);
        let converged = config.convergence_tolerance > T::zero()
            && data_energy > T::zero()
            && j / data_energy < config.convergence_tolerance;
        if iteration == config.max_iterations || converged {
            break;
        }
        let g = op.adjoint_with_terms(&e, &terms);
        rho.iter_mut().zip(&g).for_each(|(r, gk)| *r -= step * *gk);
        iteration += 1;
    }
    Ok(SolverState {
        iterate: rho,
        init_norm,
        objective_history: history,
        iteration,
    })
}

/// Per-pixel mean squared error after removing the global sign ambiguity.
pub fn aligned_mse<T: Real>(estimate: &[T], truth: &[T]) -> T {
    assert_eq!(estimate.len(), truth.len(), "aligned_mse length mismatch");
    if truth.is_empty() {
        return T::zero();
    }
    let sign = if dot(truth, estimate) < T::zero() { -T::one() } else { T::one() };
    let sse: T = truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| (*t - sign * *e) * (*t - sign * *e))
        .sum();
    sse / T::from_usize_lossy(truth.len())
}

/// [`aligned_mse`] divided by the mean square of the truth.
pub fn relative_aligned_mse<T: Real>(estimate: &[T], truth: &[T]) -> T {
    let ms = dot(truth, truth) / T::from_usize_lossy(truth.len().max(1));
    aligned_mse(estimate, truth) / ms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{build_measurement_vectors, AmplitudeMode, SpectralGrid};
    use crate::geometry::{Geometry, SceneGrid};
    use rand::Rng;
    use std::f64::consts::TAU;

    fn operator(n: usize, m: usize, side: usize) -> LiftedOperator<f64> {
        let grid = SceneGrid::new(2.4 * side as f64, side).unwrap();
        let g = Geometry::arc(n, TAU, 10_000.0, 250.0, [15_800.0, 0.0, 250.0]).unwrap();
        let s = SpectralGrid::from_hz(10e9, 50e6, m).unwrap();
        LiftedOperator::new(build_measurement_vectors(&grid, &g, &s, AmplitudeMode::Compensated).unwrap())
            .unwrap()
    }

    #[test]
    fn aligned_mse_examples() {
        let t = [1.0f64, -2.0, 0.5];
        assert_eq!(aligned_mse(&t, &t), 0.0);
        assert_eq!(aligned_mse(&[-1.0, 2.0, -0.5], &t), 0.0);
        assert!((aligned_mse(&[0.0; 3], &t) - 5.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_truth_and_is_odd() {
        let op = operator(4, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = op.forward_rank1(&truth).unwrap();
        let g = gradient(&truth, &d, &op).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));

        let rho: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = rho.iter().map(|x| -x).collect();
        let g1 = gradient(&rho, &d, &op).unwrap();
        let g2 = gradient(&neg, &d, &op).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a + b).abs() < 1e-14);
        }
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let op = operator(4, 8, 3);
        let truth: Vec<f64> = (0..9).map(|k| (k as f64 * 0.7).sin()).collect();
        let d = op.forward_rank1(&truth).unwrap();
        let cfg = SolverConfig { max_iterations: 50, ..Default::default() };
        for sign in [1.0, -1.0] {
            let start: Vec<f64> = truth.iter().map(|x| sign * x).collect();
            let state = descend(start.clone(), &d, &op, &cfg, |_, _, _| {}).unwrap();
            for (a, b) in state.iterate.iter().zip(&start) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_iterations_returns_spectral_start() {
        let op = operator(6, 16, 3);
        let truth: Vec<f64> = (0..9).map(|k| 1.0 + 0.1 * k as f64).collect();
        let d = op.forward_rank1(&truth).unwrap();
        let cfg = SolverConfig { max_iterations: 0, ..Default::default() };
        let sol = solve(&d, &op, &cfg).unwrap();
        assert_eq!(sol.state.iterate, sol.init.rho0);
        assert_eq!(sol.state.objective_history.len(), 1);
    }

    #[test]
    fn single_pixel_init() {
        let grid = SceneGrid::new(2.0, 1).unwrap();
        let g = Geometry::arc(3, TAU, 10_000.0, 250.0, [15_800.0, 0.0, 250.0]).unwrap();
        let s = SpectralGrid::from_hz(10e9, 50e6, 4).unwrap();
        let op = LiftedOperator::new(build_measurement_vectors(&grid, &g, &s, AmplitudeMode::Compensated).unwrap())
            .unwrap();
        let d = op.forward_rank1(&[-1.5]).unwrap();
        let init = spectral_initialize(&d, &op, &SolverConfig::default()).unwrap();
        assert!((init.eigenvalue - 1.5f64.powi(2)).abs() < 1e-12);
        assert!((init.rho0[0].abs() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn non_positive_spectrum_is_rejected() {
        let op = operator(4, 8, 3);
        let truth: Vec<f64> = (0..9).map(|k| 1.0 + 0.1 * k as f64).collect();
        let d = op.forward_rank1(&truth).unwrap();
        let neg: Vec<Complex<f64>> = d.values().iter().map(|v| -v).collect();
        let neg = InterferometricData::new(4, 8, neg).unwrap();
        // X̂(-d) = -X̂(d) is dominated by a negative eigenvalue, yet not necessarily all-negative
        match spectral_initialize(&neg, &op, &SolverConfig::default()) {
            Err(Error::NonPositiveEigenvalue { eigenvalue }) => assert!(eigenvalue <= 0.0),
            Ok(init) => {
                let xv = op.backprojection_matvec(&neg, &init.eigenvector).unwrap();
                assert!(init.eigenvalue > 0.0);
                let resid: f64 = xv
                    .iter()
                    .zip(&init.eigenvector)
                    .map(|(a, b)| (a - init.eigenvalue * b).powi(2))
                    .sum();
                // non-convergence is reported rather than fatal
                if init.converged {
                    assert!(resid.sqrt() < 1e-6 * init.eigenvalue);
                }
            }
            Err(e) => panic!("unexpected error {e}"),
        }
        let zero = InterferometricData::new(4, 8, vec![Complex::new(0.0, 0.0); d.len()]).unwrap();
        assert!(matches!(
            spectral_initialize(&zero, &op, &SolverConfig::default()),
            Err(Error::NonPositiveEigenvalue { .. })
        ));
    }

    #[test]
    fn divergence_guard_trips() {
        let op = operator(4, 8, 3);
        let truth: Vec<f64> = (0..9).map(|k| (k as f64).cos()).collect();
        let d = op.forward_rank1(&truth).unwrap();
        let cfg = SolverConfig { step_size: 50.0, max_iterations: 200, ..Default::default() };
        let start: Vec<f64> = truth.iter().map(|x| x * 0.9 + 0.05).collect();
        assert!(matches!(
            descend(start, &d, &op, &cfg, |_, _, _| {}),
            Err(Error::Diverged { .. }) | Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.step_size = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig::<f64> { power_iterations: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn convergence_tolerance_stops_early() {
        let op = operator(8, 16, 3);
        let truth: Vec<f64> = (0..9).map(|k| 0.5 + 0.05 * k as f64).collect();
        let d = op.forward_rank1(&truth).unwrap();
        let cfg = SolverConfig { convergence_tolerance: 1e-3, ..Default::default() };
        let sol = solve(&d, &op, &cfg).unwrap();
        assert!(sol.state.iteration < cfg.max_iterations);
        let last = sol.final_objective();
        assert!(last / (0.5 * d.norm_sqr()) < 1e-3);
    }

    #[test]
    fn monotone_run_has_no_flagged_steps() {
        let op = operator(8, 16, 3);
        let truth: Vec<f64> = (0..9).map(|k| 0.5 + 0.05 * k as f64).collect();
        let d = op.forward_rank1(&truth).unwrap();
        let cfg = SolverConfig { max_iterations: 300, ..Default::default() };
        let sol = solve(&d, &op, &cfg).unwrap();
        assert_eq!(sol.state.objective_increases(), 0);
        let flagged = SolverState {
            iterate: vec![0.0],
            init_norm: 1.0,
            objective_history: vec![3.0, 2.0, 2.5, 1.0],
            iteration: 3,
        };
        assert_eq!(flagged.objective_increases(), 1);
    }
}
