//! Matrix-free lifted forward map `F` restricted to rank-1 inputs, and its
//! symmetrized real-part adjoint applied to a vector.
//!
//! All scaling lives in the single factor `s = 1/sqrt(M C(N,2))`, so with compensated
//! amplitudes `‖F(ρρᵀ)‖² ≈ ‖ρρᵀ‖_F²` and no extra `1/M` appears in the adjoint.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{correlation_scale, receiver_pairs, InterferometricData, MeasurementVectors};
use crate::scalar::{pair_count, Real};

const PIXEL_CHUNK: usize = 256;

/// Matrix-free lifted forward operator built from a set of measurement vectors.
#[derive(Debug)]
pub struct LiftedOperator<T> {
    vectors: MeasurementVectors<T>,
    pairs: Vec<(usize, usize)>,
    scale: T,
    multiplications: AtomicU64,
}

impl<T: Real> Clone for LiftedOperator<T> {
    fn clone(&self) -> Self {
        Self {
            vectors: self.vectors.clone(),
            pairs: self.pairs.clone(),
            scale: self.scale,
            multiplications: AtomicU64::new(self.multiplications.load(Ordering::Relaxed)),
        }
    }
}

impl<T: Real> LiftedOperator<T> {
    pub fn new(vectors: MeasurementVectors<T>) -> Result<Self> {
        if vectors.receivers() < 2 {
            return Err(Error::invalid("receivers", "at least two receivers are required"));
        }
        Ok(Self {
            pairs: receiver_pairs(vectors.receivers()),
            scale: correlation_scale(vectors.receivers(), vectors.freqs()),
            vectors,
            multiplications: AtomicU64::new(0),
        })
    }

    pub fn vectors(&self) -> &MeasurementVectors<T> {
        &self.vectors
    }

    pub fn receivers(&self) -> usize {
        self.vectors.receivers()
    }

    pub fn freqs(&self) -> usize {
        self.vectors.freqs()
    }

    pub fn pixels(&self) -> usize {
        self.vectors.pixels()
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Length of the interferometric data vector, `M C(N,2)`.
    pub fn data_len(&self) -> usize {
        pair_count(self.receivers()) * self.freqs()
    }

    /// Complex multiplications performed since construction (or the last reset).
    pub fn multiplication_count(&self) -> u64 {
        self.multiplications.load(Ordering::Relaxed)
    }

    pub fn reset_multiplication_count(&self) {
        self.multiplications.store(0, Ordering::Relaxed);
    }

    fn count(&self, n: usize) {
        self.multiplications.fetch_add(n as u64, Ordering::Relaxed);
    }

    fn check_pixels(&self, v: &[T], context: &'static str) -> Result<()> {
        if v.len() != self.pixels() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.pixels(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_data(&self, e: &[Complex<T>], context: &'static str) -> Result<()> {
        if e.len() != self.data_len() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.data_len(),
                got: e.len(),
            });
        }
        Ok(())
    }

    /// Linear terms `<L_i^m, ρ>` for every receiver and frequency, row-major `i * M + m`.
    pub fn linear_terms(&self, rho: &[T]) -> Result<Vec<Complex<T>>> {
        self.check_pixels(rho, "reflectivity length")?;
        Ok(self.linear_terms_unchecked(rho))
    }

    fn linear_terms_unchecked(&self, rho: &[T]) -> Vec<Complex<T>> {
        let k = self.pixels();
        let (re, im) = self.vectors.planes();
        self.count(self.receivers() * self.freqs() * k);
        re.par_chunks(k.max(1))
            .zip(im.par_chunks(k.max(1)))
            .map(|(lr, li)| {
                let (a, b) = dot2(lr, li, rho);
                Complex::new(a, -b)
            })
            .collect()
    }

    /// Pairwise products `s * a_i * conj(a_j)` of precomputed linear terms.
    fn correlate_terms(&self, terms: &[Complex<T>]) -> Vec<Complex<T>> {
        let m_count = self.freqs();
        self.count(self.pairs.len() * m_count);
        let mut out = Vec::with_capacity(self.data_len());
        for &(i, j) in &self.pairs {
            let ai = &terms[i * m_count..(i + 1) * m_count];
            let aj = &terms[j * m_count..(j + 1) * m_count];
            out.extend(ai.iter().zip(aj).map(|(x, y)| x * y.conj() * self.scale));
        }
        out
    }

    /// `F(ρρᵀ)`: entries `s <L_i^m,ρ> conj(<L_j^m,ρ>)`.
    pub fn forward_rank1(&self, rho: &[T]) -> Result<InterferometricData<T>> {
        let terms = self.linear_terms(rho)?;
        InterferometricData::new(self.receivers(), self.freqs(), self.correlate_terms(&terms))
    }

    /// Forward values together with the linear terms they were built from.
    pub(crate) fn forward_with_terms(&self, rho: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let terms = self.linear_terms_unchecked(rho);
        let values = self.correlate_terms(&terms);
        (values, terms)
    }

    /// `P_S(Re{F^H(e)}) ρ` without forming the `K×K` matrix.
    pub fn adjoint_apply(&self, e: &[Complex<T>], rho: &[T]) -> Result<Vec<T>> {
        self.check_data(e, "interferometric vector length")?;
        self.check_pixels(rho, "reflectivity length")?;
        let terms = self.linear_terms_unchecked(rho);
        Ok(self.adjoint_with_terms(e, &terms))
    }

    /// Applies `X̂ = P_S(Re{F^H(d)})` to `v`.
    pub fn backprojection_matvec(&self, d: &InterferometricData<T>, v: &[T]) -> Result<Vec<T>> {
        if d.receivers() != self.receivers() || d.freqs() != self.freqs() {
            return Err(Error::DimensionMismatch {
                context: "interferometric data shape",
                expected: self.data_len(),
                got: d.len(),
            });
        }
        self.adjoint_apply(d.values(), v)
    }

    /// Adjoint given the linear terms of `ρ`.
    ///
    /// `F^H(e) = s Σ_p e_p L_i L_j^H`; symmetrizing and taking the real part gives
    /// `Re Σ_{n,m} w_{n,m} L_n^m` with `w_i += (s/2) e_p a_j` and `w_j += (s/2) conj(e_p) a_i`.
    pub(crate) fn adjoint_with_terms(&self, e: &[Complex<T>], terms: &[Complex<T>]) -> Vec<T> {
        let m_count = self.freqs();
        let k = self.pixels();
        let half_scale = self.scale * T::half();
        let mut weights = vec![Complex::new(T::zero(), T::zero()); self.receivers() * m_count];
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            for m in 0..m_count {
                let ep = e[p * m_count + m] * half_scale;
                weights[i * m_count + m] += ep * terms[j * m_count + m];
                weights[j * m_count + m] += ep.conj() * terms[i * m_count + m];
            }
        }
        self.count(2 * self.pairs.len() * m_count + self.receivers() * m_count * k);

        let (re, im) = self.vectors.planes();
        let mut out = vec![T::zero(); k];
        // each output pixel accumulates rows in a fixed order, so results do not depend on threading
        out.par_chunks_mut(PIXEL_CHUNK)
            .enumerate()
            .for_each(|(chunk, dst)| {
                let lo = chunk * PIXEL_CHUNK;
                let hi = lo + dst.len();
                for (row, w) in weights.iter().enumerate() {
                    let base = row * k;
                    let lr = &re[base + lo..base + hi];
                    let li = &im[base + lo..base + hi];
                    let (wr, wi) = (w.re, w.im);
                    for ((o, a), b) in dst.iter_mut().zip(lr).zip(li) {
                        *o += wr * *a - wi * *b;
                    }
                }
            });
        out
    }
}

/// `(Σ re·x, Σ im·x)` with a fixed four-way split accumulation.
#[inline]
fn dot2<T: Real>(re: &[T], im: &[T], x: &[T]) -> (T, T) {
    let mut ar = [T::zero(); 4];
    let mut ai = [T::zero(); 4];
    let chunks = x.len() / 4;
    for c in 0..chunks {
        let o = 4 * c;
        for l in 0..4 {
            ar[l] += re[o + l] * x[o + l];
            ai[l] += im[o + l] * x[o + l];
        }
    }
    let mut sr = (ar[0] + ar[1]) + (ar[2] + ar[3]);
    let mut si = (ai[0] + ai[1]) + (ai[2] + ai[3]);
    for t in 4 * chunks..x.len() {
        sr += re[t] * x[t];
        si += im[t] * x[t];
    }
    (sr, si)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{
        build_measurement_vectors, cross_correlate, simulate_receiver_data, AmplitudeMode,
        SpectralGrid,
    };
    use crate::geometry::{Geometry, SceneGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn operator(n: usize, m: usize, side: usize) -> LiftedOperator<f64> {
        let grid = SceneGrid::new(2.4 * side as f64, side).unwrap();
        let g = Geometry::arc(n, TAU, 10_000.0, 250.0, [15_800.0, 0.0, 250.0]).unwrap();
        let s = SpectralGrid::from_hz(10e9, 50e6, m).unwrap();
        LiftedOperator::new(build_measurement_vectors(&grid, &g, &s, AmplitudeMode::Compensated).unwrap())
            .unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_inputs() {
        let op = operator(4, 8, 3);
        let f = op.forward_rank1(&[0.0; 9]).unwrap();
        assert!(f.values().iter().all(|v| v.norm() == 0.0));
        let e = vec![Complex::new(0.0, 0.0); op.data_len()];
        let g = op.adjoint_apply(&e, &[1.0; 9]).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_pixel_has_modulus_scale() {
        let op = operator(4, 8, 3);
        let mut rho = vec![0.0; 9];
        rho[4] = 1.0;
        let f = op.forward_rank1(&rho).unwrap();
        for v in f.values() {
            assert!((v.norm() - op.scale()).abs() < 1e-15);
        }
    }

    #[test]
    fn agrees_with_correlated_simulation() {
        let op = operator(5, 8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_vec(&mut rng, 16);
        let f = op.forward_rank1(&rho).unwrap();
        let c = cross_correlate(&simulate_receiver_data(&rho, op.vectors()).unwrap()).unwrap();
        let scale = c.norm_sqr().sqrt();
        for (a, b) in f.values().iter().zip(c.values()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn quadratic_homogeneity_and_adjoint_linearity() {
        let op = operator(4, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_vec(&mut rng, 9);
        let c = -1.7;
        let scaled: Vec<f64> = rho.iter().map(|r| c * r).collect();
        let f1 = op.forward_rank1(&rho).unwrap();
        let f2 = op.forward_rank1(&scaled).unwrap();
        for (a, b) in f1.values().iter().zip(f2.values()) {
            assert!((a * (c * c) - b).norm() < 1e-12);
        }
        let e1: Vec<Complex<f64>> = (0..op.data_len())
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let e2: Vec<Complex<f64>> = (0..op.data_len())
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let sum: Vec<Complex<f64>> = e1.iter().zip(&e2).map(|(a, b)| a * 2.0 + b).collect();
        let g1 = op.adjoint_apply(&e1, &rho).unwrap();
        let g2 = op.adjoint_apply(&e2, &rho).unwrap();
        let gs = op.adjoint_apply(&sum, &rho).unwrap();
        for ((a, b), s) in g1.iter().zip(&g2).zip(&gs) {
            assert!((2.0 * a + b - s).abs() < 1e-12);
        }
    }

    #[test]
    fn backprojection_is_symmetric() {
        let op = operator(4, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = op.forward_rank1(&random_vec(&mut rng, 9)).unwrap();
        let u = random_vec(&mut rng, 9);
        let v = random_vec(&mut rng, 9);
        let xu = op.backprojection_matvec(&d, &u).unwrap();
        let xv = op.backprojection_matvec(&d, &v).unwrap();
        let lhs: f64 = u.iter().zip(&xv).map(|(a, b)| a * b).sum();
        let rhs: f64 = xu.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn dimension_checks() {
        let op = operator(3, 4, 2);
        assert!(op.forward_rank1(&[1.0; 3]).is_err());
        assert!(op.adjoint_apply(&[Complex::new(0.0, 0.0); 3], &[1.0; 4]).is_err());
        let other = operator(4, 4, 2);
        let d = other.forward_rank1(&[1.0; 4]).unwrap();
        assert!(op.backprojection_matvec(&d, &[1.0; 4]).is_err());
    }

    #[test]
    fn multiplication_count_scales_with_nmk() {
        // one forward plus one adjoint costs 2·N·M·K + 3·M·C(N,2)
        for (n, m, side) in [(4, 8, 3), (6, 16, 5)] {
            let op = operator(n, m, side);
            let k = side * side;
            let rho = vec![0.5; k];
            let (values, terms) = op.forward_with_terms(&rho);
            let _ = op.adjoint_with_terms(&values, &terms);
            let expected = 2 * n * m * k + 3 * m * pair_count(n);
            assert_eq!(op.multiplication_count(), expected as u64);
        }
    }

    #[test]
    fn f32_operator_tracks_f64() {
        let grid = SceneGrid::<f32>::new(7.2, 3).unwrap();
        let g = Geometry::<f32>::arc(4, std::f32::consts::TAU, 10_000.0, 250.0, [15_800.0, 0.0, 250.0])
            .unwrap();
        let s = SpectralGrid::<f32>::from_hz(1e9, 10e6, 8).unwrap();
        let op32 = LiftedOperator::new(
            build_measurement_vectors(&grid, &g, &s, AmplitudeMode::Compensated).unwrap(),
        )
        .unwrap();
        let rho = [0.3f32, -0.1, 0.8, 0.0, 1.0, 0.2, -0.4, 0.6, 0.1];
        let f = op32.forward_rank1(&rho).unwrap();
        let norm: f32 = f.norm_sqr();
        let rho_norm: f32 = rho.iter().map(|r| r * r).sum();
        assert!(norm.is_finite() && norm > 0.0);
        assert!(norm < 10.0 * rho_norm * rho_norm);
    }
}
