//! Closed-form analysis objects: far-field phase differences, the frequency kernel,
//! the data-norm expansion, restricted-isometry and resolution bounds, sample
//! complexity checks, and a Monte-Carlo RIC estimate.
//!
//! Closed-form quantities are evaluated in `f64` regardless of the scalar type
//! used elsewhere; large phase arguments do not survive single precision.

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{receiver_pairs, SpectralGrid};
use crate::geometry::{Geometry, SceneGrid};
use crate::operator::LiftedOperator;
use crate::scalar::{dot3, pair_count, sub3, Real, SPEED_OF_LIGHT};

/// RIC level below which GWF is guaranteed to recover the scene exactly.
pub const RIC_THRESHOLD: f64 = 0.214;

/// Frequency samples per unit `L/Δ_res` needed for the sinc approximation to stay within 1%.
pub const SAMPLES_PER_RESOLUTION_CELL: f64 = 5.8;

/// Default budget for the quadruple sum in [`lemma1_norm`], in evaluated terms.
pub const LEMMA1_DEFAULT_BUDGET: usize = 200_000_000;

/// `Φ = ⟨â_i, x_k − x_k'⟩ − ⟨â_j, x_l − x_l'⟩ + ⟨â_t, x_k − x_k' − x_l + x_l'⟩`, meters.
#[allow(clippy::too_many_arguments)]
pub fn farfield_phase(
    geometry: &Geometry<f64>,
    grid: &SceneGrid<f64>,
    i: usize,
    j: usize,
    k: usize,
    kp: usize,
    l: usize,
    lp: usize,
) -> f64 {
    let dk = sub3(&grid.position(k), &grid.position(kp));
    let dl = sub3(&grid.position(l), &grid.position(lp));
    let t = geometry.transmitter_look();
    dot3(&geometry.receiver_look(i), &dk) - dot3(&geometry.receiver_look(j), &dl)
        + dot3(&t, &sub3(&dk, &dl))
}

/// `𝒦(Φ) = [sin((ω_c'+B/2)Φ/c₀) − sin((ω_c'−B/2)Φ/c₀)] / (BΦ/c₀)`.
///
/// Below `|BΦ/2c₀| < 1e-6` the difference quotient loses digits and the equal
/// product form `cos(ω_c'Φ/c₀)·(1 − (BΦ/2c₀)²/6)` is used instead; `𝒦(0) = 1`.
pub fn kernel(phi: f64, spectral: &SpectralGrid<f64>) -> f64 {
    let (wc, b) = (spectral.shifted_center(), spectral.bandwidth());
    let half = 0.5 * b * phi / SPEED_OF_LIGHT;
    if half == 0.0 {
        return 1.0;
    }
    if half.abs() < 1e-6 {
        return (wc * phi / SPEED_OF_LIGHT).cos() * (1.0 - half * half / 6.0);
    }
    let hi = ((wc + 0.5 * b) * phi / SPEED_OF_LIGHT).sin();
    let lo = ((wc - 0.5 * b) * phi / SPEED_OF_LIGHT).sin();
    (hi - lo) / (b * phi / SPEED_OF_LIGHT)
}

/// Unnormalized `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `|𝒦(Φ)| ≤ 2c₀/(B|Φ|)`; infinite at `Φ = 0`.
pub fn kernel_envelope(phi: f64, spectral: &SpectralGrid<f64>) -> f64 {
    2.0 * SPEED_OF_LIGHT / (spectral.bandwidth() * phi.abs())
}

/// Frequency average `(1/M) Σ_m exp(−iω_m Φ/c₀)` and its continuous-band approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricSum {
    /// Dirichlet closed form.
    pub exact: Complex64,
    /// `e^{−iω_c'Φ/c₀}·sinc(BΦ/2c₀)`.
    pub sinc: Complex64,
    /// `|exact − sinc|`, relative to the common peak value 1.
    pub error: f64,
}

pub fn geometric_sum(phi: f64, spectral: &SpectralGrid<f64>) -> GeometricSum {
    let m = spectral.len() as f64;
    let b = spectral.bandwidth();
    let carrier = Complex64::from_polar(1.0, -spectral.shifted_center() * phi / SPEED_OF_LIGHT);
    let x = 0.5 * b * phi / SPEED_OF_LIGHT;
    let den = m * (x / m).sin();
    let ratio = if den.abs() < 1e-12 {
        // grating lobe of the discrete sum (or Φ = 0): take the limit
        let lobe = (x / (m * std::f64::consts::PI)).round();
        if (lobe * (m - 1.0)) % 2.0 == 0.0 {
            1.0
        } else {
            -1.0
        }
    } else {
        x.sin() / den
    };
    let exact = carrier * ratio;
    let approx = carrier * sinc(x);
    GeometricSum {
        exact,
        sinc: approx,
        error: (exact - approx).norm(),
    }
}

/// `⌈5.8·L/Δ_res⌉`.
pub fn required_freq_samples(side_length: f64, range_resolution: f64) -> usize {
    (SAMPLES_PER_RESOLUTION_CELL * side_length / range_resolution).ceil() as usize
}

/// `‖ρ‖⁴ + (1/C(N,2)) Σ_{i<j} Σ 𝒦(Φ) ρ_k ρ_k' ρ_l' ρ_l`, the inner sum running over
/// every `(k, k', l, l')` except those with both `k = k'` and `l = l'`.
///
/// Evaluates `C(N,2)·K⁴` kernel terms; fails when that exceeds `budget`.
pub fn lemma1_norm(
    rho: &[f64],
    geometry: &Geometry<f64>,
    grid: &SceneGrid<f64>,
    spectral: &SpectralGrid<f64>,
    budget: usize,
) -> Result<f64> {
    let k = grid.len();
    if rho.len() != k {
        return Err(Error::DimensionMismatch {
            context: "reflectivity length",
            expected: k,
            got: rho.len(),
        });
    }
    let n = geometry.receiver_count();
    let required = pair_count(n)
        .checked_mul(k.pow(4))
        .unwrap_or(usize::MAX);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let norm2: f64 = rho.iter().map(|r| r * r).sum();
    let t = geometry.transmitter_look();
    let pos = grid.positions();
    let pairs = receiver_pairs(n);
    let per_pair: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let ui = geometry.receiver_look(i);
            let uj = geometry.receiver_look(j);
            let proj = |u: &[f64; 3], x: &[f64; 3]| dot3(u, x) + dot3(&t, x);
            let pi: Vec<f64> = pos.iter().map(|x| proj(&ui, x)).collect();
            let pj: Vec<f64> = pos.iter().map(|x| proj(&uj, x)).collect();
            let mut acc = 0.0;
            for a in 0..k {
                for b in 0..k {
                    let wab = rho[a] * rho[b];
                    if wab == 0.0 {
                        continue;
                    }
                    let left = pi[a] - pi[b];
                    for c in 0..k {
                        for e in 0..k {
                            if a == b && c == e {
                                continue;
                            }
                            let phi = left - (pj[c] - pj[e]);
                            acc += kernel(phi, spectral) * wab * rho[c] * rho[e];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let cross: f64 = per_pair.iter().sum();
    Ok(norm2 * norm2 + cross / pairs.len() as f64)
}

/// Plug-in quantities of the RIC and resolution bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// `λ_c = 2πc₀/ω_c'`, meters.
    pub wavelength: f64,
    /// `Δ_res = πc₀/B`, meters.
    pub range_resolution: f64,
    /// Scene side `L`, meters.
    pub side_length: f64,
    /// Pixel spacing `Δ`, meters.
    pub spacing: f64,
    pub pixels: usize,
    pub receivers: usize,
    /// Aperture `A`, radians.
    pub aperture: f64,
    /// Elevation `φ`, radians.
    pub elevation: f64,
}

impl BoundInputs {
    /// Collects the inputs from an arc geometry; other layouts have no closed-form bound.
    pub fn new(
        spectral: &SpectralGrid<f64>,
        grid: &SceneGrid<f64>,
        geometry: &Geometry<f64>,
    ) -> Result<Self> {
        let arc = geometry.arc_layout().ok_or_else(|| {
            Error::invalid("geometry", "closed-form bounds need a circular-arc layout")
        })?;
        let inputs = Self {
            wavelength: spectral.wavelength(),
            range_resolution: spectral.range_resolution(),
            side_length: grid.side_length(),
            spacing: grid.spacing(),
            pixels: grid.len(),
            receivers: geometry.receiver_count(),
            aperture: arc.aperture,
            elevation: arc.elevation,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("range_resolution", self.range_resolution),
            ("side_length", self.side_length),
            ("spacing", self.spacing),
            ("aperture", self.aperture),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        if self.pixels == 0 || self.receivers == 0 {
            return Err(Error::invalid("pixels", "counts must be positive"));
        }
        if !(self.elevation.cos() > 0.0) {
            return Err(Error::invalid("elevation", "must lie in (-π/2, π/2)"));
        }
        let implied = self.spacing * (self.pixels as f64).sqrt();
        if (implied - self.side_length).abs() > 1e-9 * self.side_length {
            return Err(Error::invalid("spacing", "Δ·√K must equal the scene side L"));
        }
        Ok(())
    }

    fn first_term_numerator(&self) -> f64 {
        let c = self.elevation.cos();
        std::f64::consts::TAU / self.aperture * 2.0 * self.wavelength
            * (self.side_length * self.range_resolution).sqrt()
            / (c * c.sqrt())
    }
}

/// The two terms of the RIC upper bound and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicBound {
    /// Finite-frequency term `(2π/A)·2λ_c√(LΔ_res)/(Δ² cosφ √cosφ)`.
    pub first: f64,
    /// Finite-receiver term `c·K·A²/N²·λ_c^{-3/2}`.
    pub second: f64,
    pub total: f64,
}

pub fn ric_bound(inputs: &BoundInputs, order_constant: f64) -> RicBound {
    let first = inputs.first_term_numerator() / (inputs.spacing * inputs.spacing);
    let n = inputs.receivers as f64;
    let second = order_constant * inputs.pixels as f64 * inputs.aperture * inputs.aperture
        / (n * n)
        * inputs.wavelength.powf(-1.5);
    RicBound {
        first,
        second,
        total: first + second,
    }
}

/// Smallest pixel spacing for which the first RIC term stays below [`RIC_THRESHOLD`], meters.
pub fn resolution_bound(inputs: &BoundInputs) -> f64 {
    (inputs.first_term_numerator() / RIC_THRESHOLD).sqrt()
}

/// One sample-complexity comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityCheck {
    pub name: &'static str,
    pub have: f64,
    pub need: f64,
}

impl ComplexityCheck {
    pub fn passed(&self) -> bool {
        self.have >= self.need
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleComplexityReport {
    pub checks: Vec<ComplexityCheck>,
}

impl SampleComplexityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(ComplexityCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&ComplexityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for SampleComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<8} {:<22} have {:>12.1}  need {:>12.1}",
                if c.passed() { "pass" } else { "warn" },
                c.name,
                c.have,
                c.need
            )?;
        }
        Ok(())
    }
}

/// Compares `M·N²` with `K^{5/4}`, `N²` with `K^{3/4}` and `M` with `5.8·L/Δ_res`.
pub fn sample_complexity_check(
    pixels: usize,
    freq_samples: usize,
    receivers: usize,
    side_over_resolution: f64,
) -> SampleComplexityReport {
    let k = pixels as f64;
    let m = freq_samples as f64;
    let n2 = (receivers * receivers) as f64;
    SampleComplexityReport {
        checks: vec![
            ComplexityCheck {
                name: "M*N^2 vs K^(5/4)",
                have: m * n2,
                need: k.powf(1.25),
            },
            ComplexityCheck {
                name: "N^2 vs K^(3/4)",
                have: n2,
                need: k.powf(0.75),
            },
            ComplexityCheck {
                name: "M vs 5.8*L/D_res",
                have: m,
                need: SAMPLES_PER_RESOLUTION_CELL * side_over_resolution,
            },
        ],
    }
}

/// Running maximum of `|‖F(ρρᵀ)‖² − 1|` over `trials` random real unit vectors `ρ`.
///
/// A sampled lower bound on the rank-1 RIC; element `t` of the result is the estimate
/// after `t + 1` trials.
pub fn empirical_ric_trace<T: Real>(
    op: &LiftedOperator<T>,
    trials: usize,
    seed: u64,
) -> Result<Vec<T>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = op.pixels();
    let mut best = T::zero();
    let mut trace = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut rho: Vec<T> = (0..k)
            .map(|_| T::lit(StandardNormal.sample(&mut rng)))
            .collect();
        let norm = rho.iter().map(|x| *x * *x).sum::<T>().sqrt();
        rho.iter_mut().for_each(|x| *x /= norm);
        let energy = op.forward_rank1(&rho)?.norm_sqr();
        best = best.max((energy - T::one()).abs());
        trace.push(best);
    }
    Ok(trace)
}

pub fn empirical_ric<T: Real>(op: &LiftedOperator<T>, trials: usize, seed: u64) -> Result<T> {
    Ok(*empirical_ric_trace(op, trials, seed)?.last().expect("trials >= 1"))
}
