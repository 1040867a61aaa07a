//! Estimation error modulo the global sign (real) or phase (complex) that
//! magnitude-only data cannot resolve.

use std::f64::consts::PI;

use crate::error::{check_len, Result, TwfError};
use crate::scalar::{diff_norm, inner, norm, norm_sqr, Field, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEstimate<T> {
    pub z_aligned: Vec<T>,
    /// Rotation removed from `z`, in `[0, 2π)`; `0` or `π` for real signals.
    pub phase: f64,
    pub distance: f64,
}

impl<T> AlignedEstimate<T> {
    /// `+1` or `-1` for real alignments.
    pub fn sign(&self) -> f64 {
        if self.phase == 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// `min_φ ‖e^{-iφ} z − x‖`.
pub fn dist<T: Scalar>(z: &[T], x: &[T]) -> Result<f64> {
    check_len(x.len(), z.len())?;
    Ok(match T::FIELD {
        Field::Real => {
            let minus = diff_norm(z, x);
            let plus = z
                .iter()
                .zip(x)
                .map(|(&a, &b)| (a + b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            minus.min(plus)
        }
        Field::Complex => {
            let d2 = norm_sqr(z) + norm_sqr(x) - 2.0 * inner(x, z).abs();
            d2.max(0.0).sqrt()
        }
    })
}

pub fn relative_error<T: Scalar>(z: &[T], x: &[T]) -> Result<f64> {
    let nx = norm(x);
    if nx == 0.0 {
        return Err(TwfError::InvalidArgument("relative error needs x != 0".into()));
    }
    Ok(dist(z, x)? / nx)
}

/// Rotates `z` onto `x`, removing the global sign or phase.
pub fn align<T: Scalar>(z: &[T], x: &[T]) -> Result<AlignedEstimate<T>> {
    check_len(x.len(), z.len())?;
    let phase = match T::FIELD {
        Field::Real => {
            let minus = diff_norm(z, x);
            let plus = z
                .iter()
                .zip(x)
                .map(|(&a, &b)| (a + b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if minus <= plus {
                0.0
            } else {
                PI
            }
        }
        Field::Complex => {
            let c = inner(x, z);
            if c == T::zero() {
                0.0
            } else {
                c.arg().rem_euclid(2.0 * PI)
            }
        }
    };
    let z_aligned: Vec<T> = z.iter().map(|&v| v.rotate(-phase)).collect();
    let distance = diff_norm(&z_aligned, x);
    Ok(AlignedEstimate {
        z_aligned,
        phase,
        distance,
    })
}
