//! Reference solvers for real-valued designs: conjugate gradient on the normal
//! equations of the signed (linear) problem, and the maximum-likelihood
//! estimate when the signs of `a_i^T x` are revealed by an oracle.

use nalgebra::DMatrix;

use crate::error::{check_len, Result, TwfError};
use crate::measurement::{DenseEnsemble, MeasurementOperator};
use crate::scalar::{axpy, diff_norm, norm, norm_sqr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    Converged,
    MaxIters,
    /// A search direction with zero curvature appeared before convergence.
    Breakdown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgRecord {
    pub t: usize,
    /// `‖b − A z‖`; nonincreasing since each iterate minimizes it over a
    /// growing Krylov space.
    pub residual_norm: f64,
    /// `‖A^T (b − A z)‖`
    pub normal_residual_norm: f64,
    pub relative_error: Option<f64>,
    pub matvecs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgTrace {
    pub records: Vec<CgRecord>,
    pub matvec_count: usize,
    pub status: CgStatus,
}

impl CgTrace {
    /// Matrix-vector products spent when the relative error first drops to `tol`.
    pub fn matvecs_to_reach(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.relative_error.is_some_and(|e| e <= tol))
            .map(|r| r.matvecs)
    }
}

/// CG on `A^T A z = A^T b` from `z = 0`, using one forward and one adjoint
/// product per iteration. Stops when `‖A^T(b − Az)‖ <= tol ‖A^T b‖`.
pub fn solve_cg_normal<E: MeasurementOperator<f64> + ?Sized>(
    op: &E,
    b: &[f64],
    tol: f64,
    max_iters: usize,
    truth: Option<&[f64]>,
) -> Result<(Vec<f64>, CgTrace)> {
    check_len(op.num_measurements(), b.len())?;
    if !(tol > 0.0) {
        return Err(TwfError::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let n = op.dim();
    let truth_norm = truth.map(norm);
    let rel = |z: &[f64]| -> Option<f64> {
        truth.zip(truth_norm).map(|(x, nx)| diff_norm(z, x) / nx)
    };

    let mut z = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = op.adjoint(&r)?;
    let mut matvecs = 1;
    let s0 = norm(&s);
    let mut gamma = norm_sqr(&s);
    let mut p = s.clone();
    let mut records = vec![CgRecord {
        t: 0,
        residual_norm: norm(&r),
        normal_residual_norm: s0,
        relative_error: rel(&z),
        matvecs,
    }];
    let mut status = CgStatus::MaxIters;
    if s0 == 0.0 {
        status = CgStatus::Converged;
    }
    let mut t = 0;
    while status == CgStatus::MaxIters && t < max_iters {
        t += 1;
        let q = op.forward(&p)?;
        let qq = norm_sqr(&q);
        if qq == 0.0 {
            status = CgStatus::Breakdown;
            break;
        }
        let alpha = gamma / qq;
        axpy(alpha, &p, &mut z);
        axpy(-alpha, &q, &mut r);
        s = op.adjoint(&r)?;
        matvecs += 2;
        let gamma_next = norm_sqr(&s);
        let sn = gamma_next.sqrt();
        records.push(CgRecord {
            t,
            residual_norm: norm(&r),
            normal_residual_norm: sn,
            relative_error: rel(&z),
            matvecs,
        });
        if sn <= tol * s0 {
            status = CgStatus::Converged;
            break;
        }
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, &si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    Ok((
        z,
        CgTrace {
            records,
            matvec_count: matvecs,
            status,
        },
    ))
}

/// Condition number of `A^T A / m` from a dense symmetric eigendecomposition.
pub fn gram_condition_number(e: &DenseEnsemble<f64>) -> f64 {
    let n = e.dim();
    let m = e.num_measurements();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for row in e.rows() {
        for r in 0..n {
            let ar = row[r];
            for c in r..n {
                gram[(r, c)] += ar * row[c];
            }
        }
    }
    for r in 0..n {
        for c in r..n {
            let v = gram[(r, c)] / m as f64;
            gram[(r, c)] = v;
            gram[(c, r)] = v;
        }
    }
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    max / min
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub max_iters: usize,
    /// Stop once `‖∇f‖ <= tol · ‖z‖`, with `f` normalized by `1/m`.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_iters: 20_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting from the feasible start.
    pub objective: Vec<f64>,
}

/// Fraction of the distance to the boundary `φ_i a_i^T z = 0` a step may cover.
const FRACTION_TO_BOUNDARY: f64 = 0.99;
const ARMIJO: f64 = 1e-4;

/// Maximum-likelihood estimate with known signs `φ_i`:
/// minimizes `(1/m) Σ −2 y_i log(φ_i a_i^T z) + (a_i^T z)²`.
///
/// The start is the least-squares fit to `φ_i √y_i`, pushed into the feasible
/// cone by cyclic half-space projections when needed. Descent uses
/// Barzilai–Borwein trial steps, capped by a fraction-to-boundary rule and
/// shrunk until the Armijo condition holds.
pub fn solve_phase_oracle_mle<E: MeasurementOperator<f64> + ?Sized>(
    op: &E,
    y: &[f64],
    signs: &[f64],
    cfg: &OracleConfig,
) -> Result<OracleSolution> {
    let m = op.num_measurements();
    check_len(m, y.len())?;
    check_len(m, signs.len())?;
    if y.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(TwfError::InvalidArgument("observations must be finite and >= 0".into()));
    }
    if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(TwfError::InvalidArgument("signs must be +1 or -1".into()));
    }

    let target: Vec<f64> = y.iter().zip(signs).map(|(&v, &s)| s * v.sqrt()).collect();
    let (z0, _) = solve_cg_normal(op, &target, 1e-12, 10 * op.dim() + 10, None)?;
    let mut z = feasible_start(op, y, signs, z0)?;

    let objective = |az: &[f64]| -> f64 {
        let mut acc = 0.0;
        for ((&a, &yi), &s) in az.iter().zip(y).zip(signs) {
            if yi > 0.0 {
                let u = s * a;
                if u <= 0.0 {
                    return f64::INFINITY;
                }
                acc -= 2.0 * yi * u.ln();
            }
            acc += a * a;
        }
        acc / m as f64
    };
    let gradient = |az: &[f64]| -> Result<Vec<f64>> {
        let w: Vec<f64> = az
            .iter()
            .zip(y)
            .map(|(&a, &yi)| {
                let log_part = if yi > 0.0 { -2.0 * yi / a } else { 0.0 };
                (log_part + 2.0 * a) / m as f64
            })
            .collect();
        op.adjoint(&w)
    };

    let mut az = op.forward(&z)?;
    let mut f = objective(&az);
    let mut g = gradient(&az)?;
    let mut trial: f64 = 0.25;
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let gn2 = norm_sqr(&g);
        if gn2.sqrt() <= cfg.tol * norm(&z) {
            converged = true;
            break;
        }
        iterations += 1;
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let ad = op.forward(&d)?;
        let mut alpha_max = f64::INFINITY;
        for (((&a, &b), &yi), &s) in az.iter().zip(&ad).zip(y).zip(signs) {
            if yi > 0.0 && s * b < 0.0 {
                alpha_max = alpha_max.min(FRACTION_TO_BOUNDARY * (s * a) / (-s * b));
            }
        }
        let mut alpha = trial.min(alpha_max);
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = az.iter().zip(&ad).map(|(&a, &b)| a + alpha * b).collect();
            if objective(&cand) <= f - ARMIJO * alpha * gn2 {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No decrease is representable any more.
            converged = gn2.sqrt() <= 1e3 * cfg.tol * norm(&z);
            break;
        }
        axpy(alpha, &d, &mut z);
        az = op.forward(&z)?;
        f = objective(&az);
        history.push(f);
        let g_next = gradient(&az)?;
        let sy: f64 = d
            .iter()
            .zip(g_next.iter().zip(&g))
            .map(|(&di, (&gn, &go))| alpha * di * (gn - go))
            .sum();
        let ss = alpha * alpha * gn2;
        trial = if sy > 0.0 { ss / sy } else { 1.0 };
        g = g_next;
    }
    Ok(OracleSolution {
        z,
        iterations,
        converged,
        objective: history,
    })
}

/// Projects onto `φ_i a_i^T z >= 0.01 √y_i` for violated rows until all rows
/// with `y_i > 0` are strictly feasible.
fn feasible_start<E: MeasurementOperator<f64> + ?Sized>(
    op: &E,
    y: &[f64],
    signs: &[f64],
    mut z: Vec<f64>,
) -> Result<Vec<f64>> {
    const SWEEPS: usize = 200;
    let m = op.num_measurements();
    let row_sq: Vec<f64> = op.row_norms().iter().map(|r| r * r).collect();
    for _ in 0..SWEEPS {
        let az = op.forward(&z)?;
        let mut v = vec![0.0; m];
        let mut violated = 0;
        for i in 0..m {
            if y[i] > 0.0 && signs[i] * az[i] <= 0.0 {
                let margin = 0.01 * y[i].sqrt();
                v[i] = signs[i] * (margin - signs[i] * az[i]) / row_sq[i];
                violated += 1;
            }
        }
        if violated == 0 {
            return Ok(z);
        }
        // Simultaneous projection: average of the individual corrections.
        let step = op.adjoint(&v)?;
        axpy(1.0 / violated as f64, &step, &mut z);
        // Individual rows can still lag behind; fall back to sequential
        // projections row by row when few violations remain.
        if violated <= 16 {
            let az = op.forward(&z)?;
            for i in 0..m {
                if y[i] > 0.0 && signs[i] * az[i] <= 0.0 {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    let a_i = op.adjoint(&e)?;
                    let cur: f64 = a_i.iter().zip(&z).map(|(a, b)| a * b).sum();
                    let margin = 0.01 * y[i].sqrt();
                    let coef = signs[i] * (margin - signs[i] * cur) / row_sq[i];
                    axpy(coef, &a_i, &mut z);
                }
            }
        }
    }
    let az = op.forward(&z)?;
    if az
        .iter()
        .zip(y)
        .zip(signs)
        .all(|((&a, &yi), &s)| yi == 0.0 || s * a > 0.0)
    {
        Ok(z)
    } else {
        Err(TwfError::Infeasible)
    }
}
