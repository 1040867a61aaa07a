//! Observation models and the signal-to-noise conventions used to report
//! Poisson experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_len, Result, TwfError};
use crate::metrics::dist;
use crate::scalar::{norm_sqr, Scalar};

/// Means below this use sequential-search inversion; at or above it the
/// PTRS transformed-rejection sampler is used.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Noiseless,
    Poisson,
    /// Caller-supplied additive perturbation `y = mu + eta`.
    Additive(Vec<f64>),
}

/// Produces observations `y` from noiseless intensities `mu`.
pub fn observe(mu: &[f64], spec: &NoiseSpec, seed: u64) -> Result<Vec<f64>> {
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(TwfError::InvalidArgument("non-finite intensity".into()));
    }
    match spec {
        NoiseSpec::Noiseless => Ok(mu.to_vec()),
        NoiseSpec::Poisson => {
            if let Some(bad) = mu.iter().find(|&&v| v < 0.0) {
                return Err(TwfError::InvalidArgument(format!(
                    "Poisson mean must be nonnegative, got {bad}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(mu.iter().map(|&lam| sample_poisson(lam, &mut rng) as f64).collect())
        }
        NoiseSpec::Additive(eta) => {
            check_len(mu.len(), eta.len())?;
            if eta.iter().any(|v| !v.is_finite()) {
                return Err(TwfError::InvalidArgument("non-finite additive noise".into()));
            }
            Ok(mu.iter().zip(eta).map(|(m, e)| m + e).collect())
        }
    }
}

/// Draws one Poisson variate with mean `lambda`.
///
/// `lambda < 30`: inversion by sequential search over the CDF.
/// `lambda >= 30`: Hörmann's PTRS transformed rejection with squeeze.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < POISSON_INVERSION_LIMIT {
        poisson_inversion(lambda, rng)
    } else {
        poisson_ptrs(lambda, rng)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        // The tail mass left at this point is below double precision.
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `SNR = 3‖x‖²`.
pub fn snr<T: Scalar>(x: &[T]) -> f64 {
    3.0 * norm_sqr(x)
}

pub fn snr_db<T: Scalar>(x: &[T]) -> Result<f64> {
    let s = snr(x);
    if s <= 0.0 {
        return Err(TwfError::InvalidArgument("SNR in dB is undefined for x = 0".into()));
    }
    Ok(10.0 * s.log10())
}

/// Norm that makes `3‖x‖²` equal to the requested SNR in dB.
pub fn norm_for_snr_db(snr_db: f64) -> f64 {
    (10f64.powf(snr_db / 10.0) / 3.0).sqrt()
}

/// `dist²(zhat, x) / ‖x‖²`.
pub fn relative_mse<T: Scalar>(zhat: &[T], x: &[T]) -> Result<f64> {
    let nx = norm_sqr(x);
    if nx == 0.0 {
        return Err(TwfError::InvalidArgument("relative MSE needs x != 0".into()));
    }
    let d = dist(zhat, x)?;
    Ok(d * d / nx)
}
