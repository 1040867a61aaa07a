//! Measurement ensembles: dense Gaussian designs and FFT-backed coded
//! diffraction patterns, exposed through a common matrix-free operator trait.
//!
//! Row `i` of an ensemble is the sensing vector `a_i`; the forward map returns
//! `a_i^* z` for every row and the adjoint returns `Σ_i a_i v_i`.
//!
//! Sampling is reproducible across builds: every ensemble is drawn from a
//! `ChaCha8Rng` seeded with the caller's seed, Gaussian entries come from the
//! ziggurat sampler of `rand_distr::StandardNormal` (row-major, real part
//! before imaginary part), and mask symbols are drawn with `random_range(0..4)`.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result, TwfError};
use crate::scalar::{Field, Scalar};

/// A linear map `z ↦ (a_1^* z, …, a_m^* z)` together with its adjoint.
pub trait MeasurementOperator<T: Scalar>: Send + Sync {
    /// Signal dimension `n`.
    fn dim(&self) -> usize;

    /// Number of measurements `m`.
    fn num_measurements(&self) -> usize;

    fn forward(&self, z: &[T]) -> Result<Vec<T>>;

    fn adjoint(&self, v: &[T]) -> Result<Vec<T>>;

    /// `‖a_i‖` for every row.
    fn row_norms(&self) -> Vec<f64>;

    /// `|a_i^* x|²` for every row.
    fn intensities(&self, x: &[T]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.into_iter().map(|v| v.norm_sqr()).collect())
    }
}

/// Dense row-major ensemble with rows `a_i`.
#[derive(Clone, PartialEq)]
pub struct DenseEnsemble<T> {
    m: usize,
    n: usize,
    rows: Vec<T>,
}

impl<T: Scalar> DenseEnsemble<T> {
    /// Builds an ensemble from `m` rows of length `n` stored row-major.
    pub fn from_rows(m: usize, n: usize, rows: Vec<T>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(TwfError::InvalidArgument(format!(
                "ensemble needs m >= 1 and n >= 1 (got m={m}, n={n})"
            )));
        }
        check_len(m * n, rows.len())?;
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(TwfError::InvalidArgument("non-finite ensemble entry".into()));
        }
        let ens = DenseEnsemble { m, n, rows };
        if ens.row_norms().iter().any(|&r| r <= 0.0) {
            return Err(TwfError::InvalidArgument("ensemble has a zero row".into()));
        }
        Ok(ens)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut rows = vec![T::zero(); n * n];
        for i in 0..n {
            rows[i * n + i] = T::from_real(1.0);
        }
        Self::from_rows(n, n, rows)
    }

    /// i.i.d. Gaussian rows; see [`Scalar::sample_gaussian`] for the law.
    pub fn sample_gaussian(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(TwfError::InvalidArgument(format!(
                "ensemble needs m >= 1 and n >= 1 (got m={m}, n={n})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..m * n).map(|_| T::sample_gaussian(&mut rng)).collect();
        Self::from_rows(m, n, rows)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.rows.chunks_exact(self.n)
    }
}

impl<T: Scalar> fmt::Debug for DenseEnsemble<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseEnsemble")
            .field("field", &T::FIELD)
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl<T: Scalar> MeasurementOperator<T> for DenseEnsemble<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_measurements(&self) -> usize {
        self.m
    }

    fn forward(&self, z: &[T]) -> Result<Vec<T>> {
        check_len(self.n, z.len())?;
        Ok(self
            .rows()
            .map(|a| {
                let mut acc = T::zero();
                for (&aj, &zj) in a.iter().zip(z) {
                    acc += aj.conj() * zj;
                }
                acc
            })
            .collect())
    }

    fn adjoint(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.m, v.len())?;
        let mut out = vec![T::zero(); self.n];
        for (a, &vi) in self.rows().zip(v) {
            if vi == T::zero() {
                continue;
            }
            for (o, &aj) in out.iter_mut().zip(a) {
                *o += aj * vi;
            }
        }
        Ok(out)
    }

    fn row_norms(&self) -> Vec<f64> {
        self.rows()
            .map(|a| a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }
}

/// One-dimensional coded diffraction patterns `y^(l) = |F D^(l) x|²` with the
/// unnormalized DFT `F_{kj} = exp(-2πi kj/n)`, so every row has norm `√n`.
///
/// Rows are never materialized; forward and adjoint cost `O(L n log n)`.
#[derive(Clone)]
pub struct CdpEnsemble {
    n: usize,
    masks: Vec<Vec<Complex64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

pub const CDP_SYMBOLS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(0.0, -1.0),
];

impl CdpEnsemble {
    pub fn from_masks(masks: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = masks.first().map(Vec::len).unwrap_or(0);
        if masks.is_empty() || n == 0 {
            return Err(TwfError::InvalidArgument(
                "CDP ensemble needs at least one non-empty mask".into(),
            ));
        }
        for mask in &masks {
            check_len(n, mask.len())?;
            if mask.iter().any(|d| !CDP_SYMBOLS.contains(d)) {
                return Err(TwfError::InvalidArgument(
                    "CDP mask entries must lie in {1, -1, i, -i}".into(),
                ));
            }
        }
        let mut planner = FftPlanner::new();
        Ok(CdpEnsemble {
            n,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            masks,
        })
    }

    /// `num_masks` masks with entries drawn uniformly from `{1, -1, i, -i}`.
    pub fn sample(n: usize, num_masks: usize, seed: u64) -> Result<Self> {
        if n == 0 || num_masks == 0 {
            return Err(TwfError::InvalidArgument(format!(
                "CDP needs n >= 1 and L >= 1 (got n={n}, L={num_masks})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let masks = (0..num_masks)
            .map(|_| {
                (0..n)
                    .map(|_| CDP_SYMBOLS[rng.random_range(0..4)])
                    .collect()
            })
            .collect();
        Self::from_masks(masks)
    }

    pub fn masks(&self) -> &[Vec<Complex64>] {
        &self.masks
    }

    pub fn num_masks(&self) -> usize {
        self.masks.len()
    }
}

impl fmt::Debug for CdpEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdpEnsemble")
            .field("n", &self.n)
            .field("masks", &self.masks.len())
            .finish()
    }
}

impl MeasurementOperator<Complex64> for CdpEnsemble {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_measurements(&self) -> usize {
        self.n * self.masks.len()
    }

    fn forward(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, z.len())?;
        let mut out = Vec::with_capacity(self.num_measurements());
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for mask in &self.masks {
            let start = out.len();
            out.extend(mask.iter().zip(z).map(|(&d, &zj)| d * zj));
            self.fft.process_with_scratch(&mut out[start..], &mut scratch);
        }
        Ok(out)
    }

    fn adjoint(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.num_measurements(), v.len())?;
        let mut out = vec![Complex64::default(); self.n];
        let mut buf = vec![Complex64::default(); self.n];
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        for (mask, block) in self.masks.iter().zip(v.chunks_exact(self.n)) {
            buf.copy_from_slice(block);
            // rustfft's inverse transform is unnormalized, i.e. exactly F^*.
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            for ((o, &d), &b) in out.iter_mut().zip(mask).zip(&buf) {
                *o += d.conj() * b;
            }
        }
        Ok(out)
    }

    fn row_norms(&self) -> Vec<f64> {
        vec![(self.n as f64).sqrt(); self.num_measurements()]
    }
}

/// Tagged measurement design, as selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    GaussianReal,
    GaussianComplex,
    Cdp,
}

impl Design {
    pub fn field(self) -> Field {
        match self {
            Design::GaussianReal => Field::Real,
            Design::GaussianComplex | Design::Cdp => Field::Complex,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Design::GaussianReal => "gaussian-real",
            Design::GaussianComplex => "gaussian-complex",
            Design::Cdp => "cdp",
        }
    }
}

impl std::str::FromStr for Design {
    type Err = TwfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-real" => Ok(Design::GaussianReal),
            "gaussian-complex" => Ok(Design::GaussianComplex),
            "cdp" => Ok(Design::Cdp),
            other => Err(TwfError::InvalidArgument(format!("unknown design '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum MeasurementEnsemble {
    GaussianReal(DenseEnsemble<f64>),
    GaussianComplex(DenseEnsemble<Complex64>),
    Cdp(CdpEnsemble),
}

impl MeasurementEnsemble {
    pub fn design(&self) -> Design {
        match self {
            MeasurementEnsemble::GaussianReal(_) => Design::GaussianReal,
            MeasurementEnsemble::GaussianComplex(_) => Design::GaussianComplex,
            MeasurementEnsemble::Cdp(_) => Design::Cdp,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasurementEnsemble::GaussianReal(e) => e.dim(),
            MeasurementEnsemble::GaussianComplex(e) => e.dim(),
            MeasurementEnsemble::Cdp(e) => e.dim(),
        }
    }

    pub fn num_measurements(&self) -> usize {
        match self {
            MeasurementEnsemble::GaussianReal(e) => e.num_measurements(),
            MeasurementEnsemble::GaussianComplex(e) => e.num_measurements(),
            MeasurementEnsemble::Cdp(e) => e.num_measurements(),
        }
    }

    pub fn row_norms(&self) -> Vec<f64> {
        match self {
            MeasurementEnsemble::GaussianReal(e) => e.row_norms(),
            MeasurementEnsemble::GaussianComplex(e) => e.row_norms(),
            MeasurementEnsemble::Cdp(e) => e.row_norms(),
        }
    }
}

pub fn sample_gaussian_ensemble(
    n: usize,
    m: usize,
    field: Field,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    Ok(match field {
        Field::Real => MeasurementEnsemble::GaussianReal(DenseEnsemble::sample_gaussian(n, m, seed)?),
        Field::Complex => {
            MeasurementEnsemble::GaussianComplex(DenseEnsemble::sample_gaussian(n, m, seed)?)
        }
    })
}

pub fn sample_cdp_ensemble(n: usize, num_masks: usize, seed: u64) -> Result<MeasurementEnsemble> {
    Ok(MeasurementEnsemble::Cdp(CdpEnsemble::sample(n, num_masks, seed)?))
}

/// Wraps an operator and counts forward and adjoint applications.
pub struct CountingOperator<'a, E> {
    inner: &'a E,
    forward: AtomicUsize,
    adjoint: AtomicUsize,
}

impl<'a, E> CountingOperator<'a, E> {
    pub fn new(inner: &'a E) -> Self {
        CountingOperator {
            inner,
            forward: AtomicUsize::new(0),
            adjoint: AtomicUsize::new(0),
        }
    }

    pub fn forward_count(&self) -> usize {
        self.forward.load(Ordering::Relaxed)
    }

    pub fn adjoint_count(&self) -> usize {
        self.adjoint.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> usize {
        self.forward_count() + self.adjoint_count()
    }
}

impl<T: Scalar, E: MeasurementOperator<T>> MeasurementOperator<T> for CountingOperator<'_, E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn num_measurements(&self) -> usize {
        self.inner.num_measurements()
    }

    fn forward(&self, z: &[T]) -> Result<Vec<T>> {
        self.forward.fetch_add(1, Ordering::Relaxed);
        self.inner.forward(z)
    }

    fn adjoint(&self, v: &[T]) -> Result<Vec<T>> {
        self.adjoint.fetch_add(1, Ordering::Relaxed);
        self.inner.adjoint(v)
    }

    fn row_norms(&self) -> Vec<f64> {
        self.inner.row_norms()
    }
}
