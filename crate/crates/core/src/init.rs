//! Spectral initialization: leading eigenvector of the (optionally truncated)
//! data-weighted covariance `Y = (1/m) Σ y_i a_i a_i^*`, found by matrix-free
//! power iterations and rescaled to the norm estimated from the data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Result, TwfError};
use crate::measurement::MeasurementOperator;
use crate::scalar::{inner, norm, sample_gaussian_vector, scaled, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    /// Rows with `|y_i| > alpha_y² λ₀²` are dropped when `truncated` is set.
    pub alpha_y: f64,
    pub power_iters: usize,
    pub seed: u64,
    pub truncated: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            alpha_y: 3.0,
            power_iters: 50,
            seed: 0,
            truncated: true,
        }
    }
}

impl InitConfig {
    pub fn plain(power_iters: usize, seed: u64) -> Self {
        InitConfig {
            power_iters,
            seed,
            truncated: false,
            ..InitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.power_iters == 0 {
            return Err(TwfError::InvalidArgument("power_iters must be >= 1".into()));
        }
        if self.truncated && !(self.alpha_y >= 3.0) {
            return Err(TwfError::InvalidArgument(format!(
                "alpha_y must be >= 3 for truncated initialization, got {}",
                self.alpha_y
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitResult<T> {
    pub z0: Vec<T>,
    /// Unit-norm leading eigenvector estimate.
    pub direction: Vec<T>,
    pub lambda0: f64,
    pub kept_count: usize,
    /// Rayleigh quotient `⟨v_k, Y v_k⟩` of every power iterate.
    pub rayleigh: Vec<f64>,
}

/// `√((1/m) Σ y_i)`.
pub fn lambda0(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(TwfError::InvalidArgument("no observations".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean < 0.0 {
        return Err(TwfError::NegativeMean(mean));
    }
    Ok(mean.sqrt())
}

/// Indices kept by the initialization: `|y_i| <= alpha_y² λ₀²`.
pub fn init_mask(y: &[f64], alpha_y: f64, lambda0: f64) -> Vec<bool> {
    let bound = alpha_y * alpha_y * lambda0 * lambda0;
    y.iter().map(|v| v.abs() <= bound).collect()
}

/// `Y v` with `Y = (1/m) Σ_{keep} y_i a_i a_i^*`, without forming `Y`.
pub fn truncated_matvec<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    op: &E,
    y: &[f64],
    keep: &[bool],
    v: &[T],
) -> Result<Vec<T>> {
    let m = op.num_measurements();
    check_len(m, y.len())?;
    check_len(m, keep.len())?;
    let mut w = op.forward(v)?;
    for ((wi, &yi), &k) in w.iter_mut().zip(y).zip(keep) {
        *wi = if k { wi.scale(yi) } else { T::zero() };
    }
    let out = op.adjoint(&w)?;
    Ok(scaled(1.0 / m as f64, &out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration<T> {
    pub vector: Vec<T>,
    pub rayleigh: Vec<f64>,
}

/// Fixed-count power method from a seeded Gaussian start. A zero product
/// triggers one restart from a fresh random vector before giving up.
pub fn power_method<T: Scalar>(
    mut apply: impl FnMut(&[T]) -> Result<Vec<T>>,
    n: usize,
    iters: usize,
    seed: u64,
) -> Result<PowerIteration<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fresh = || -> Vec<T> {
        let v: Vec<T> = sample_gaussian_vector(n, &mut rng);
        let s = norm(&v);
        scaled(1.0 / s, &v)
    };
    let mut v = fresh();
    let mut restarted = false;
    let mut rayleigh = Vec::with_capacity(iters);
    let mut k = 0;
    while k < iters {
        let w = apply(&v)?;
        let wn = norm(&w);
        if wn == 0.0 || !wn.is_finite() {
            if restarted {
                return Err(TwfError::PowerIterationCollapsed);
            }
            restarted = true;
            v = fresh();
            continue;
        }
        rayleigh.push(inner(&v, &w).re());
        v = scaled(1.0 / wn, &w);
        k += 1;
    }
    Ok(PowerIteration { vector: v, rayleigh })
}

/// Spectral initialization, truncated or plain according to `cfg.truncated`.
pub fn spectral_init<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    op: &E,
    y: &[f64],
    cfg: &InitConfig,
) -> Result<InitResult<T>> {
    cfg.validate()?;
    let m = op.num_measurements();
    let n = op.dim();
    check_len(m, y.len())?;
    let lambda0 = lambda0(y)?;
    let keep = if cfg.truncated {
        init_mask(y, cfg.alpha_y, lambda0)
    } else {
        vec![true; m]
    };
    let kept_count = keep.iter().filter(|&&k| k).count();
    if kept_count == 0 {
        return Err(TwfError::AllTruncated);
    }
    let power = power_method(
        |v| truncated_matvec(op, y, &keep, v),
        n,
        cfg.power_iters,
        cfg.seed,
    )?;
    let row_energy: f64 = op.row_norms().iter().map(|r| r * r).sum();
    let scale = ((m * n) as f64 / row_energy).sqrt() * lambda0;
    Ok(InitResult {
        z0: scaled(scale, &power.vector),
        direction: power.vector,
        lambda0,
        kept_count,
        rayleigh: power.rayleigh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::DenseEnsemble;
    use crate::scalar::diff_norm;
    use rand::Rng;

    #[test]
    fn lambda0_examples() {
        assert_eq!(lambda0(&[4.0, 4.0, 4.0]).unwrap(), 2.0);
        assert_eq!(lambda0(&[0.0; 5]).unwrap(), 0.0);
        assert!((lambda0(&[1.0, 2.0, 3.0, 6.0]).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(lambda0(&[-3.0, 1.0]), Err(TwfError::NegativeMean(-1.0)));
    }

    #[test]
    fn matvec_with_nothing_kept_is_zero() {
        let e = DenseEnsemble::<f64>::sample_gaussian(3, 5, 1).unwrap();
        let out = truncated_matvec(&e, &[1.0; 5], &[false; 5], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn matvec_identity_example() {
        let e = DenseEnsemble::<f64>::identity(2).unwrap();
        let out = truncated_matvec(&e, &[3.0, 1.0], &[true, true], &[1.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.5, 0.0]);
    }

    #[test]
    fn matvec_matches_explicit_matrix() {
        let e = DenseEnsemble::<f64>::sample_gaussian(3, 6, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..4.0)).collect();
        let keep = [true, false, true, true, false, true];
        let v = [0.3, -1.1, 0.7];
        let mut big_y = [[0.0; 3]; 3];
        for i in 0..6 {
            if !keep[i] {
                continue;
            }
            let a = e.row(i);
            for r in 0..3 {
                for c in 0..3 {
                    big_y[r][c] += y[i] * a[r] * a[c] / 6.0;
                }
            }
        }
        let expect: Vec<f64> = (0..3)
            .map(|r| (0..3).map(|c| big_y[r][c] * v[c]).sum())
            .collect();
        let got = truncated_matvec(&e, &y, &keep, &v).unwrap();
        assert!(diff_norm(&got, &expect) <= 1e-10);
    }

    #[test]
    fn identity_two_by_two_eigenproblem() {
        // Y = diag(3, 1)/2 so the leading direction is ±e₁; λ₀ = √2 and
        // √(mn/Σ‖a_i‖²) = √(4/2), giving ‖z0‖ = 2.
        let e = DenseEnsemble::<f64>::identity(2).unwrap();
        let cfg = InitConfig {
            alpha_y: 3.0,
            power_iters: 50,
            seed: 4,
            truncated: true,
        };
        let r = spectral_init(&e, &[3.0, 1.0], &cfg).unwrap();
        assert!((r.direction[0].abs() - 1.0).abs() < 1e-6);
        assert!(r.direction[1].abs() < 1e-6);
        assert!((norm(&r.z0) - 2.0).abs() < 1e-12);
        assert_eq!(r.kept_count, 2);
    }

    #[test]
    fn truncation_drops_large_observations() {
        let e = DenseEnsemble::<f64>::identity(3).unwrap();
        let cfg = InitConfig::default();
        // 9 · mean = 303 > 100, so nothing is dropped.
        let r = spectral_init(&e, &[100.0, 0.5, 0.5], &cfg).unwrap();
        assert_eq!(r.kept_count, 3);
        // One huge value among 39 ones: 9 · mean ≈ 234 < 1000.
        let mut y = vec![1.0; 40];
        y[0] = 1000.0;
        let e = DenseEnsemble::<f64>::sample_gaussian(4, y.len(), 2).unwrap();
        let r = spectral_init(&e, &y, &cfg).unwrap();
        assert_eq!(r.kept_count, y.len() - 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let e = DenseEnsemble::<f64>::identity(2).unwrap();
        let mut cfg = InitConfig::default();
        cfg.power_iters = 0;
        assert!(spectral_init(&e, &[1.0, 1.0], &cfg).is_err());
        let cfg = InitConfig {
            alpha_y: 2.0,
            ..InitConfig::default()
        };
        assert!(spectral_init(&e, &[1.0, 1.0], &cfg).is_err());
        assert!(spectral_init(&e, &[1.0], &InitConfig::default()).is_err());
    }

    #[test]
    fn zero_data_collapses_after_restart() {
        let e = DenseEnsemble::<f64>::identity(2).unwrap();
        assert_eq!(
            spectral_init(&e, &[0.0, 0.0], &InitConfig::default()),
            Err(TwfError::PowerIterationCollapsed)
        );
    }

    #[test]
    fn all_truncated_is_an_error() {
        // Signed data with a tiny positive mean: every |y_i| exceeds 9 λ₀².
        let e = DenseEnsemble::<f64>::identity(2).unwrap();
        let r = spectral_init(&e, &[5.0, -4.99], &InitConfig::default());
        assert_eq!(r, Err(TwfError::AllTruncated));
    }
}
