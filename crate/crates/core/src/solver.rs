//! Truncated Wirtinger Flow.
//!
//! Each iteration forms the Poisson log-likelihood gradient over the indices
//! that survive two trimming events and moves along it:
//!
//! * E1: `lb <= r_i <= ub` with `r_i = (√n/‖a_i‖) |a_i^* z| / ‖z‖`
//! * E2: `|y_i − |a_i^* z|²| <= alpha_h K r_i`, where `K` is the mean
//!   absolute residual at the current iterate.
//!
//! The untruncated Wirtinger Flow baseline reuses the same loop with every
//! index kept, the plain spectral start and the `min(1 − e^{−t/330}, 0.2)`
//! step schedule.

use std::f64::consts::PI;

use statrs::function::erf::erfc;

use crate::error::{check_len, Result, TwfError};
use crate::init::{spectral_init, InitConfig};
use crate::measurement::MeasurementOperator;
use crate::metrics::relative_error;
use crate::scalar::{all_finite, axpy, norm, norm_sqr, scaled, Scalar};

/// Trimming thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationParams {
    pub alpha_z_lb: f64,
    pub alpha_z_ub: f64,
    pub alpha_h: f64,
    pub alpha_y: f64,
    /// Only used by the backtracking line search.
    pub alpha_p: f64,
}

impl Default for TruncationParams {
    /// Defaults for a fixed step size.
    fn default() -> Self {
        TruncationParams {
            alpha_z_lb: 0.3,
            alpha_z_ub: 5.0,
            alpha_h: 5.0,
            alpha_y: 3.0,
            alpha_p: 5.0,
        }
    }
}

impl TruncationParams {
    /// Defaults for the backtracking line search.
    pub fn line_search_defaults() -> Self {
        TruncationParams {
            alpha_z_lb: 0.1,
            alpha_z_ub: 5.0,
            alpha_h: 6.0,
            alpha_y: 3.0,
            alpha_p: 5.0,
        }
    }

    /// Wide-open thresholds; every index with a nonzero denominator survives.
    pub fn permissive() -> Self {
        TruncationParams {
            alpha_z_lb: f64::MIN_POSITIVE,
            alpha_z_ub: f64::INFINITY,
            alpha_h: f64::INFINITY,
            alpha_y: f64::INFINITY,
            alpha_p: f64::INFINITY,
        }
    }

    fn all_positive(&self) -> bool {
        [
            self.alpha_z_lb,
            self.alpha_z_ub,
            self.alpha_h,
            self.alpha_y,
            self.alpha_p,
        ]
        .iter()
        .all(|&a| a > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Fixed,
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamCheck {
    pub zeta1: f64,
    pub zeta2: f64,
    pub mu0: f64,
    pub ok: bool,
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `P(ξ > t)` for a standard normal `ξ`.
pub fn normal_upper_tail(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// `E[ξ² 1{ξ > t}] = t φ(t) + Q(t)`.
pub fn normal_second_moment_tail(t: f64) -> f64 {
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    t * std_normal_pdf(t) + normal_upper_tail(t)
}

/// Evaluates the admissibility conditions of the trimming thresholds and the
/// step-size bound `mu0` they imply.
///
/// `zeta1` is the larger of the second moment and the probability of the
/// event `|ξ| <= √1.01·lb or |ξ| >= √0.99·ub`; `zeta2 = E[ξ² 1{|ξ| > 0.473 alpha_h}]`.
pub fn validate_params(p: &TruncationParams, mode: StepMode) -> ParamCheck {
    let lo = 1.01f64.sqrt() * p.alpha_z_lb;
    let hi = 0.99f64.sqrt() * p.alpha_z_ub;
    let (moment, prob) = if lo >= hi {
        (1.0, 1.0)
    } else {
        (
            (1.0 - 2.0 * normal_second_moment_tail(lo)) + 2.0 * normal_second_moment_tail(hi),
            (1.0 - 2.0 * normal_upper_tail(lo)) + 2.0 * normal_upper_tail(hi),
        )
    };
    let zeta1 = moment.max(prob);
    let zeta2 = 2.0 * normal_second_moment_tail(0.473 * p.alpha_h);
    let inv_h = 1.0 / p.alpha_h;
    let mu0 = (0.994 - zeta1 - zeta2 - (2.0 / (9.0 * PI)).sqrt() * inv_h)
        / (2.0 * (1.02 + 0.665 * inv_h));
    let ok = p.all_positive()
        && match mode {
            StepMode::Fixed => {
                2.0 * (zeta1 + zeta2) + (8.0 / (9.0 * PI)).sqrt() * inv_h < 1.99
                    && p.alpha_y >= 3.0
            }
            StepMode::LineSearch => {
                p.alpha_z_lb <= 0.1
                    && p.alpha_z_ub >= 5.0
                    && p.alpha_h >= 6.0
                    && p.alpha_y >= 3.0
                    && p.alpha_p >= 5.0
            }
        };
    ParamCheck {
        zeta1,
        zeta2,
        mu0,
        ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Fixed(f64),
    Backtracking { beta: f64 },
}

impl StepPolicy {
    pub fn mode(&self) -> StepMode {
        match self {
            StepPolicy::Fixed(_) => StepMode::Fixed,
            StepPolicy::Backtracking { .. } => StepMode::LineSearch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub params: TruncationParams,
    pub step: StepPolicy,
    pub max_iters: usize,
    /// Stop once `‖p‖ <= grad_tol · ‖z‖`; `0` only stops on an exact zero.
    pub grad_tol: f64,
    /// `alpha_y` is taken from `params`.
    pub init: InitConfig,
    /// Reject configurations instead of recording a warning.
    pub strict: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            params: TruncationParams::default(),
            step: StepPolicy::Fixed(0.2),
            max_iters: 1000,
            grad_tol: 0.0,
            init: InitConfig::default(),
            strict: false,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init.seed = seed;
        self
    }

    fn init_config(&self, truncated: bool) -> InitConfig {
        InitConfig {
            alpha_y: self.params.alpha_y,
            truncated,
            ..self.init.clone()
        }
    }

    /// Warnings for configurations outside the admissible parameter range.
    pub fn check(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        match self.step {
            StepPolicy::Fixed(mu) if !(mu >= 0.0) || !mu.is_finite() => {
                return Err(TwfError::InvalidArgument(format!("step size {mu} must be >= 0")))
            }
            StepPolicy::Backtracking { beta } if !(beta > 0.0 && beta < 1.0) => {
                return Err(TwfError::InvalidArgument(format!(
                    "backtracking factor {beta} must lie in (0, 1)"
                )))
            }
            _ => {}
        }
        if !self.params.all_positive() {
            return Err(TwfError::InvalidArgument("trimming thresholds must be positive".into()));
        }
        let check = validate_params(&self.params, self.step.mode());
        if !check.ok {
            warnings.push(format!(
                "trimming thresholds {:?} violate the admissible range for {:?} steps",
                self.params,
                self.step.mode()
            ));
        }
        if let StepPolicy::Fixed(mu) = self.step {
            if mu > check.mu0 {
                warnings.push(format!("step size {mu} exceeds mu0 = {:.4}", check.mu0));
            }
        }
        if self.strict && !warnings.is_empty() {
            return Err(TwfError::InvalidArgument(warnings.join("; ")));
        }
        Ok(warnings)
    }
}

/// Current iterate plus the cached products `A z` and mean absolute residual.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState<T> {
    pub z: Vec<T>,
    pub t: usize,
    pub az: Vec<T>,
    pub k: f64,
}

impl<T: Scalar> IterateState<T> {
    pub fn new<E: MeasurementOperator<T> + ?Sized>(op: &E, y: &[f64], z: Vec<T>) -> Result<Self> {
        let az = op.forward(&z)?;
        Self::from_parts(y, z, az, 0)
    }

    fn from_parts(y: &[f64], z: Vec<T>, az: Vec<T>, t: usize) -> Result<Self> {
        check_len(y.len(), az.len())?;
        let k = mean_abs_residual(y, &az);
        Ok(IterateState { z, t, az, k })
    }
}

fn mean_abs_residual<T: Scalar>(y: &[f64], az: &[T]) -> f64 {
    y.iter()
        .zip(az)
        .map(|(&yi, a)| (yi - a.norm_sqr()).abs())
        .sum::<f64>()
        / y.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    /// Relative error of the iterate after this iteration.
    pub relative_error: Option<f64>,
    pub gradient_norm: f64,
    pub step_size: f64,
    pub kept_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
    pub status: Status,
    pub init_relative_error: Option<f64>,
    /// Denominators skipped by the untruncated gradient.
    pub skipped_terms: usize,
    pub warnings: Vec<String>,
}

impl SolverTrace {
    pub fn final_relative_error(&self) -> Option<f64> {
        self.records
            .last()
            .and_then(|r| r.relative_error)
            .or(self.init_relative_error)
    }

    /// First iteration whose relative error is at most `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        if self.init_relative_error.is_some_and(|e| e <= tol) {
            return Some(0);
        }
        self.records
            .iter()
            .position(|r| r.relative_error.is_some_and(|e| e <= tol))
            .map(|i| i + 1)
    }
}

/// Data and precomputed row factors shared by every iteration.
pub struct TwfProblem<'a, T: Scalar, E: MeasurementOperator<T> + ?Sized> {
    op: &'a E,
    y: &'a [f64],
    /// `√n / ‖a_i‖`
    row_scale: Vec<f64>,
    _field: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar, E: MeasurementOperator<T> + ?Sized> TwfProblem<'a, T, E> {
    pub fn new(op: &'a E, y: &'a [f64]) -> Result<Self> {
        check_len(op.num_measurements(), y.len())?;
        let sqrt_n = (op.dim() as f64).sqrt();
        let row_scale = op.row_norms().into_iter().map(|r| sqrt_n / r).collect();
        Ok(TwfProblem {
            op,
            y,
            row_scale,
            _field: std::marker::PhantomData,
        })
    }

    pub fn op(&self) -> &E {
        self.op
    }

    pub fn y(&self) -> &[f64] {
        self.y
    }

    pub fn state(&self, z: Vec<T>) -> Result<IterateState<T>> {
        IterateState::new(self.op, self.y, z)
    }

    fn m(&self) -> usize {
        self.y.len()
    }

    /// `E1 ∩ E2` for every index, from the cached products in `st`.
    pub fn truncation_mask(&self, st: &IterateState<T>, p: &TruncationParams) -> Result<Vec<bool>> {
        let zn = norm(&st.z);
        if zn == 0.0 {
            return Err(TwfError::ZeroIterate);
        }
        Ok(st
            .az
            .iter()
            .zip(self.y)
            .zip(&self.row_scale)
            .map(|((a, &yi), &s)| {
                let ratio = s * a.abs() / zn;
                let e1 = p.alpha_z_lb <= ratio && ratio <= p.alpha_z_ub;
                let e2 = (yi - a.norm_sqr()).abs() <= p.alpha_h * st.k * ratio;
                e1 && e2
            })
            .collect())
    }

    /// `(1/m) ∇ℓ_tr(z)` and the number of indices it uses.
    pub fn truncated_gradient(
        &self,
        st: &IterateState<T>,
        p: &TruncationParams,
    ) -> Result<(Vec<T>, usize)> {
        let mask = self.truncation_mask(st, p)?;
        let mut kept = 0;
        let v: Vec<T> = st
            .az
            .iter()
            .zip(self.y)
            .zip(&mask)
            .map(|((&a, &yi), &keep)| {
                if keep {
                    kept += 1;
                    T::from_real(2.0 * (yi - a.norm_sqr())) / a.conj()
                } else {
                    T::zero()
                }
            })
            .collect();
        let g = self.op.adjoint(&v)?;
        Ok((scaled(1.0 / self.m() as f64, &g), kept))
    }

    /// `(1/m) ∇ℓ(z)` over every index, skipping denominators below
    /// `1e-14 ‖z‖`. Returns the gradient, the kept count and the skip count.
    pub fn full_gradient(&self, st: &IterateState<T>) -> Result<(Vec<T>, usize, usize)> {
        let zn = norm(&st.z);
        if zn == 0.0 {
            return Err(TwfError::ZeroIterate);
        }
        let floor = 1e-14 * zn;
        let mut skipped = 0;
        let v: Vec<T> = st
            .az
            .iter()
            .zip(self.y)
            .map(|(&a, &yi)| {
                if a.abs() < floor {
                    skipped += 1;
                    T::zero()
                } else {
                    T::from_real(2.0 * (yi - a.norm_sqr())) / a.conj()
                }
            })
            .collect();
        let g = self.op.adjoint(&v)?;
        Ok((scaled(1.0 / self.m() as f64, &g), self.m() - skipped, skipped))
    }

    /// Truncated log-likelihood along the fixed direction `p_dir`, with the
    /// index set `|a_i^* z| >= lb ‖z‖ and |a_i^* p| <= alpha_p ‖p‖` frozen at `z`.
    pub fn frozen_objective(
        &self,
        st: &IterateState<T>,
        p_dir: &[T],
        params: &TruncationParams,
    ) -> Result<FrozenObjective<'a, T>> {
        let zn = norm(&st.z);
        if zn == 0.0 {
            return Err(TwfError::ZeroIterate);
        }
        let ap = self.op.forward(p_dir)?;
        let pn = norm(p_dir);
        let keep = st
            .az
            .iter()
            .zip(&ap)
            .map(|(a, b)| a.abs() >= params.alpha_z_lb * zn && b.abs() <= params.alpha_p * pn)
            .collect();
        Ok(FrozenObjective {
            y: self.y,
            az: st.az.clone(),
            ap,
            keep,
        })
    }

    /// One iteration with the truncated gradient.
    pub fn twf_step(
        &self,
        st: &IterateState<T>,
        cfg: &SolverConfig,
    ) -> Result<(StepOutcome<T>, IterRecord)> {
        let (p, kept) = self.truncated_gradient(st, &cfg.params)?;
        let gnorm = norm(&p);
        let mut record = IterRecord {
            t: st.t,
            relative_error: None,
            gradient_norm: gnorm,
            step_size: 0.0,
            kept_count: kept,
        };
        if gnorm <= cfg.grad_tol * norm(&st.z) {
            return Ok((StepOutcome::Stationary, record));
        }
        let next = match cfg.step {
            StepPolicy::Fixed(mu) => {
                record.step_size = mu;
                self.advance(st, mu, &p)?
            }
            StepPolicy::Backtracking { beta } => {
                let obj = self.frozen_objective(st, &p, &cfg.params)?;
                let tau = match backtrack(|t| obj.eval(t), norm_sqr(&p), beta) {
                    Ok((tau, _)) => tau,
                    Err(TwfError::LineSearchUnderflow(_)) => {
                        return Ok((StepOutcome::Diverged, record))
                    }
                    Err(e) => return Err(e),
                };
                record.step_size = tau;
                let mut z = st.z.clone();
                axpy(T::from_real(tau), &p, &mut z);
                let mut az = obj.az;
                axpy(T::from_real(tau), &obj.ap, &mut az);
                if !all_finite(&z) {
                    None
                } else {
                    Some(IterateState::from_parts(self.y, z, az, st.t + 1)?)
                }
            }
        };
        Ok(match next {
            Some(s) => (StepOutcome::Moved(s), record),
            None => (StepOutcome::Diverged, record),
        })
    }

    /// `z + step·p`, or `None` when the result is not finite.
    fn advance(&self, st: &IterateState<T>, step: f64, p: &[T]) -> Result<Option<IterateState<T>>> {
        let mut z = st.z.clone();
        axpy(T::from_real(step), p, &mut z);
        if !all_finite(&z) {
            return Ok(None);
        }
        let az = self.op.forward(&z)?;
        if !all_finite(&az) {
            return Ok(None);
        }
        Ok(Some(IterateState::from_parts(self.y, z, az, st.t + 1)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome<T> {
    Moved(IterateState<T>),
    /// Gradient norm fell to the stopping tolerance; the iterate is unchanged.
    Stationary,
    Diverged,
}

/// `ℓ̂(z + τp)/m` over an index set fixed before the search.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenObjective<'a, T> {
    y: &'a [f64],
    az: Vec<T>,
    ap: Vec<T>,
    keep: Vec<bool>,
}

impl<T: Scalar> FrozenObjective<'_, T> {
    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let t = T::from_real(tau);
        let mut acc = 0.0;
        for (((&a, &b), &yi), &k) in self.az.iter().zip(&self.ap).zip(self.y).zip(&self.keep) {
            if !k {
                continue;
            }
            let q = (a + t * b).norm_sqr();
            // 0·log(0) contributes nothing.
            let log_term = if yi == 0.0 { 0.0 } else { yi * q.ln() };
            acc += log_term - q;
        }
        acc / self.y.len() as f64
    }
}

/// `(1/m) ℓ̂(z)` with the index set determined by `z` and `p_dir`.
pub fn truncated_objective<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    op: &E,
    y: &[f64],
    z: &[T],
    p_dir: &[T],
    params: &TruncationParams,
) -> Result<f64> {
    let problem = TwfProblem::new(op, y)?;
    let st = problem.state(z.to_vec())?;
    Ok(problem.frozen_objective(&st, p_dir, params)?.eval(0.0))
}

/// Smallest step accepted by the backtracking search.
pub const MIN_LINE_SEARCH_STEP: f64 = 1e-12;

/// Starts at `τ = 1` and multiplies by `beta` until
/// `f(τ) >= f(0) + τ‖p‖²/2`. Returns the accepted `τ` and the number of shrinks.
pub fn backtrack(f: impl Fn(f64) -> f64, p_norm_sqr: f64, beta: f64) -> Result<(f64, usize)> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(TwfError::InvalidArgument(format!(
            "backtracking factor {beta} must lie in (0, 1)"
        )));
    }
    if p_norm_sqr == 0.0 {
        return Err(TwfError::InvalidArgument("search direction is zero".into()));
    }
    let f0 = f(0.0);
    let mut tau = 1.0;
    let mut shrinks = 0;
    loop {
        if f(tau) >= f0 + 0.5 * tau * p_norm_sqr {
            return Ok((tau, shrinks));
        }
        tau *= beta;
        shrinks += 1;
        if tau < MIN_LINE_SEARCH_STEP {
            return Err(TwfError::LineSearchUnderflow(MIN_LINE_SEARCH_STEP));
        }
    }
}

/// Backtracking step for the truncated direction `p_dir` at `st`.
pub fn backtracking_search<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    problem: &TwfProblem<'_, T, E>,
    st: &IterateState<T>,
    p_dir: &[T],
    beta: f64,
    params: &TruncationParams,
) -> Result<f64> {
    let obj = problem.frozen_objective(st, p_dir, params)?;
    backtrack(|t| obj.eval(t), norm_sqr(p_dir), beta).map(|(tau, _)| tau)
}

/// Spectral initialization followed by truncated gradient iterations.
pub fn solve_twf<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    op: &E,
    y: &[f64],
    cfg: &SolverConfig,
    truth: Option<&[T]>,
) -> Result<(Vec<T>, SolverTrace)> {
    cfg.check()?;
    let init = spectral_init(op, y, &cfg.init_config(true))?;
    solve_twf_from(op, y, cfg, init.z0, truth)
}

/// Truncated gradient iterations from a caller-supplied start.
pub fn solve_twf_from<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    op: &E,
    y: &[f64],
    cfg: &SolverConfig,
    z0: Vec<T>,
    truth: Option<&[T]>,
) -> Result<(Vec<T>, SolverTrace)> {
    let warnings = cfg.check()?;
    let problem = TwfProblem::new(op, y)?;
    check_len(op.dim(), z0.len())?;
    let mut trace = SolverTrace {
        records: Vec::with_capacity(cfg.max_iters),
        status: Status::MaxIters,
        init_relative_error: rel(&z0, truth)?,
        skipped_terms: 0,
        warnings,
    };
    let mut st = problem.state(z0)?;
    for _ in 0..cfg.max_iters {
        let (outcome, mut record) = problem.twf_step(&st, cfg)?;
        match outcome {
            StepOutcome::Moved(next) => {
                st = next;
                record.relative_error = rel(&st.z, truth)?;
                trace.records.push(record);
            }
            StepOutcome::Stationary => {
                record.relative_error = rel(&st.z, truth)?;
                trace.records.push(record);
                trace.status = Status::Converged;
                break;
            }
            StepOutcome::Diverged => {
                record.relative_error = rel(&st.z, truth)?;
                trace.records.push(record);
                trace.status = Status::Diverged;
                break;
            }
        }
    }
    Ok((st.z, trace))
}

/// Step schedule of the Wirtinger Flow baseline.
pub fn wf_step_size(t: usize) -> f64 {
    (1.0 - (-(t as f64) / 330.0).exp()).min(0.2)
}

/// Untruncated Wirtinger Flow on the Poisson log-likelihood from the plain
/// spectral start. `cfg.params` and `cfg.step` are ignored.
pub fn solve_wf<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    op: &E,
    y: &[f64],
    cfg: &SolverConfig,
    truth: Option<&[T]>,
) -> Result<(Vec<T>, SolverTrace)> {
    let init = spectral_init(op, y, &cfg.init_config(false))?;
    solve_wf_from(op, y, cfg, init.z0, truth)
}

pub fn solve_wf_from<T: Scalar, E: MeasurementOperator<T> + ?Sized>(
    op: &E,
    y: &[f64],
    cfg: &SolverConfig,
    z0: Vec<T>,
    truth: Option<&[T]>,
) -> Result<(Vec<T>, SolverTrace)> {
    let problem = TwfProblem::new(op, y)?;
    check_len(op.dim(), z0.len())?;
    let mut trace = SolverTrace {
        records: Vec::with_capacity(cfg.max_iters),
        status: Status::MaxIters,
        init_relative_error: rel(&z0, truth)?,
        skipped_terms: 0,
        warnings: Vec::new(),
    };
    let mut st = problem.state(z0)?;
    for t in 0..cfg.max_iters {
        let (p, kept, skipped) = problem.full_gradient(&st)?;
        trace.skipped_terms += skipped;
        let gnorm = norm(&p);
        let mu = wf_step_size(t);
        let mut record = IterRecord {
            t,
            relative_error: None,
            gradient_norm: gnorm,
            step_size: mu,
            kept_count: kept,
        };
        if gnorm <= cfg.grad_tol * norm(&st.z) {
            record.step_size = 0.0;
            record.relative_error = rel(&st.z, truth)?;
            trace.records.push(record);
            trace.status = Status::Converged;
            break;
        }
        match problem.advance(&st, mu, &p)? {
            Some(next) if norm(&next.z) > 0.0 => {
                st = next;
                record.relative_error = rel(&st.z, truth)?;
                trace.records.push(record);
            }
            _ => {
                record.relative_error = rel(&st.z, truth)?;
                trace.records.push(record);
                trace.status = Status::Diverged;
                break;
            }
        }
    }
    Ok((st.z, trace))
}

fn rel<T: Scalar>(z: &[T], truth: Option<&[T]>) -> Result<Option<f64>> {
    truth.map(|x| relative_error(z, x)).transpose()
}
