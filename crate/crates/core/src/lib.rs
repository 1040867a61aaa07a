//! Phase retrieval by Truncated Wirtinger Flow.
//!
//! Recovers `x` (up to a global sign or phase) from intensities
//! `y_i ≈ |a_i^* x|²` in two stages: a truncated spectral initialization
//! followed by gradient ascent on the Poisson log-likelihood in which
//! high-leverage measurements are trimmed at every iteration.
//!
//! ```
//! use twf_core::measurement::{DenseEnsemble, MeasurementOperator};
//! use twf_core::metrics::relative_error;
//! use twf_core::solver::{solve_twf, SolverConfig};
//! use rand::SeedableRng;
//!
//! let (n, m) = (32, 256);
//! let a = DenseEnsemble::<f64>::sample_gaussian(n, m, 7).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let x: Vec<f64> = twf_core::scalar::sample_gaussian_vector(n, &mut rng);
//! let y = a.intensities(&x).unwrap();
//!
//! let (z, _trace) = solve_twf(&a, &y, &SolverConfig::default(), Some(&x)).unwrap();
//! assert!(relative_error(&z, &x).unwrap() < 1e-5);
//! ```

pub mod baselines;
pub mod error;
pub mod init;
pub mod measurement;
pub mod metrics;
pub mod noise;
pub mod scalar;
pub mod solver;

pub use error::{Result, TwfError};
pub use num_complex::Complex64;
