//! Seeded Monte Carlo experiments over (n, m/n, SNR) grids.
//!
//! Each trial draws a fresh ensemble and signal from seeds derived from the
//! master seed and the trial's grid coordinates. Trials may run in parallel,
//! but results are aggregated in (cell, trial) order so output is
//! reproducible byte for byte.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use twf_core::baselines::{gram_condition_number, solve_cg_normal, solve_phase_oracle_mle, OracleConfig};
use twf_core::init::{spectral_init, InitConfig};
use twf_core::measurement::{CdpEnsemble, DenseEnsemble, Design, MeasurementOperator};
use twf_core::metrics::relative_error;
use twf_core::noise::{norm_for_snr_db, observe, relative_mse, NoiseSpec};
use twf_core::scalar::{sample_gaussian_vector, scaled, Field, Scalar};
use twf_core::solver::{solve_twf, solve_wf, SolverConfig, StepPolicy};
use twf_core::TwfError;

use crate::seeds::{derive_seed, float_coord};
use crate::HarnessError;

/// Relative error at or below which a trial counts as exact recovery.
pub const SUCCESS_TOL: f64 = 1e-5;

/// Stopping tolerance and iteration budget of the least-squares CG baseline.
const CG_TOL: f64 = 1e-12;
const CG_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PhaseTransition,
    MseVsSnr,
    InitCompare,
    CgCompare,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PhaseTransition => "phase-transition",
            ExperimentKind::MseVsSnr => "mse-vs-snr",
            ExperimentKind::InitCompare => "init-compare",
            ExperimentKind::CgCompare => "cg-compare",
        }
    }

    fn tag(self) -> u64 {
        match self {
            ExperimentKind::PhaseTransition => 1,
            ExperimentKind::MseVsSnr => 2,
            ExperimentKind::InitCompare => 3,
            ExperimentKind::CgCompare => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Twf,
    Wf,
    Oracle,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Twf => "twf",
            SolverKind::Wf => "wf",
            SolverKind::Oracle => "oracle",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "twf" => Ok(SolverKind::Twf),
            "wf" => Ok(SolverKind::Wf),
            "oracle" => Ok(SolverKind::Oracle),
            other => Err(format!("unknown solver '{other}' (expected twf, wf or oracle)")),
        }
    }
}

fn design_tag(d: Design) -> u64 {
    match d {
        Design::GaussianReal => 1,
        Design::GaussianComplex => 2,
        Design::Cdp => 3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub design: Design,
    pub ns: Vec<usize>,
    /// `m/n`; for CDP this is the number of masks and must be an integer.
    pub ratios: Vec<f64>,
    /// Only used by `mse-vs-snr`.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub config: SolverConfig,
}

impl ExperimentSpec {
    /// Desk-scale defaults for each experiment.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut config = SolverConfig::default();
        let (ns, ratios, snr_db, solvers) = match kind {
            ExperimentKind::PhaseTransition => {
                (vec![128], vec![2.0, 3.0, 4.0, 5.0, 6.0], vec![], vec![SolverKind::Twf])
            }
            ExperimentKind::MseVsSnr => (
                vec![100],
                vec![8.0],
                vec![15.0, 25.0, 35.0, 45.0, 55.0],
                vec![SolverKind::Twf],
            ),
            ExperimentKind::InitCompare => (vec![128, 256, 512], vec![6.0], vec![], vec![]),
            ExperimentKind::CgCompare => {
                config.init.power_iters = 10;
                (vec![256], vec![8.0], vec![], vec![SolverKind::Twf])
            }
        };
        ExperimentSpec {
            kind,
            design: Design::GaussianReal,
            ns,
            ratios,
            snr_db,
            trials: 10,
            seed: 1,
            solvers,
            config,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Invalid(msg));
        if self.trials == 0 {
            return bad("trial count must be >= 1".into());
        }
        if self.ns.is_empty() || self.ratios.is_empty() {
            return bad("n and ratio grids must be nonempty".into());
        }
        if self.ns.contains(&0) {
            return bad("n must be >= 1".into());
        }
        if self.kind == ExperimentKind::MseVsSnr && self.snr_db.is_empty() {
            return bad("SNR grid must be nonempty".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite".into());
        }
        if matches!(self.kind, ExperimentKind::PhaseTransition | ExperimentKind::MseVsSnr)
            && self.solvers.is_empty()
        {
            return bad("at least one solver is required".into());
        }
        if self.solvers.contains(&SolverKind::Oracle) {
            if self.kind != ExperimentKind::MseVsSnr {
                return bad("the oracle solver is only available in mse-vs-snr".into());
            }
            if self.design != Design::GaussianReal {
                return bad("the oracle solver needs the gaussian-real design".into());
            }
        }
        if self.kind == ExperimentKind::CgCompare && self.design != Design::GaussianReal {
            return bad("cg-compare needs the gaussian-real design".into());
        }
        for &n in &self.ns {
            for &r in &self.ratios {
                self.num_measurements(n, r)?;
            }
        }
        self.config.check()?;
        Ok(())
    }

    pub fn num_measurements(&self, n: usize, ratio: f64) -> Result<usize, HarnessError> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(HarnessError::Invalid(format!("ratio {ratio} must be > 0")));
        }
        match self.design {
            Design::Cdp => {
                if ratio.fract() != 0.0 {
                    return Err(HarnessError::Invalid(format!(
                        "CDP ratio {ratio} must be an integer number of masks"
                    )));
                }
                Ok(n * ratio as usize)
            }
            _ => Ok(((ratio * n as f64).round() as usize).max(1)),
        }
    }

    /// One-line `key=value` description of everything that affects results.
    pub fn echo(&self) -> String {
        let join = |v: Vec<String>| v.join(";");
        let step = match self.config.step {
            StepPolicy::Fixed(mu) => format!("fixed:{mu}"),
            StepPolicy::Backtracking { beta } => format!("backtrack:{beta}"),
        };
        let p = &self.config.params;
        let mut s = String::new();
        let _ = write!(
            s,
            "experiment={} design={} n={} ratio={} snr-db={} trials={} seed={} solvers={} \
             step={} max-iters={} params={},{},{},{},{} power-iters={} grad-tol={}",
            self.kind.as_str(),
            self.design.as_str(),
            join(self.ns.iter().map(|v| v.to_string()).collect()),
            join(self.ratios.iter().map(|v| v.to_string()).collect()),
            join(self.snr_db.iter().map(|v| v.to_string()).collect()),
            self.trials,
            self.seed,
            join(self.solvers.iter().map(|v| v.as_str().to_string()).collect()),
            step,
            self.config.max_iters,
            p.alpha_z_lb,
            p.alpha_z_ub,
            p.alpha_h,
            p.alpha_y,
            p.alpha_p,
            self.config.init.power_iters,
            self.config.grad_tol,
        );
        s
    }

    fn trial_seeds(&self, n: usize, ratio: f64, snr: f64, trial: usize) -> TrialSeeds {
        let base = derive_seed(
            self.seed,
            &[
                self.kind.tag(),
                design_tag(self.design),
                n as u64,
                float_coord(ratio),
                float_coord(snr),
                trial as u64,
            ],
        );
        TrialSeeds {
            trial: base,
            ensemble: derive_seed(base, &[1]),
            signal: derive_seed(base, &[2]),
            noise: derive_seed(base, &[3]),
            init: derive_seed(base, &[4]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub ensemble: u64,
    pub signal: u64,
    pub noise: u64,
    pub init: u64,
}

/// Standard Gaussian signal of the given field.
pub fn draw_signal<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_gaussian_vector(n, &mut rng)
}

/// Failures that end one trial without invalidating the whole experiment.
fn is_numerical_failure(e: &TwfError) -> bool {
    matches!(
        e,
        TwfError::ZeroIterate
            | TwfError::AllTruncated
            | TwfError::PowerIterationCollapsed
            | TwfError::LineSearchUnderflow(_)
            | TwfError::Infeasible
    )
}

/// Per-trial work that is generic over the design's scalar field.
trait TrialRunner: Sync {
    type Out: Send;

    fn run<T: Scalar, E: MeasurementOperator<T>>(
        &self,
        op: &E,
        x: &[T],
        seeds: &TrialSeeds,
    ) -> Result<Self::Out, HarnessError>;

    fn run_real(
        &self,
        op: &DenseEnsemble<f64>,
        x: &[f64],
        seeds: &TrialSeeds,
    ) -> Result<Self::Out, HarnessError> {
        self.run(op, x, seeds)
    }
}

fn dispatch<R: TrialRunner>(
    design: Design,
    n: usize,
    m: usize,
    seeds: &TrialSeeds,
    runner: &R,
) -> Result<R::Out, HarnessError> {
    match design {
        Design::GaussianReal => {
            let op = DenseEnsemble::<f64>::sample_gaussian(n, m, seeds.ensemble)?;
            runner.run_real(&op, &draw_signal(n, seeds.signal), seeds)
        }
        Design::GaussianComplex => {
            let op = DenseEnsemble::<twf_core::Complex64>::sample_gaussian(n, m, seeds.ensemble)?;
            runner.run(&op, &draw_signal(n, seeds.signal), seeds)
        }
        Design::Cdp => {
            let op = CdpEnsemble::sample(n, m / n, seeds.ensemble)?;
            runner.run(&op, &draw_signal(n, seeds.signal), seeds)
        }
    }
}

/// Thread pool capped by `TWF_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("TWF_THREADS") {
        let k: usize = v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Invalid(format!("TWF_THREADS must be an integer, got '{v}'")))?;
        builder = builder.num_threads(k);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))
}

fn run_cell<R: TrialRunner>(
    pool: &rayon::ThreadPool,
    spec: &ExperimentSpec,
    n: usize,
    ratio: f64,
    snr: f64,
    runner: &R,
) -> Result<Vec<R::Out>, HarnessError> {
    let m = spec.num_measurements(n, ratio)?;
    pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| dispatch(spec.design, n, m, &spec.trial_seeds(n, ratio, snr, t), runner))
            .collect()
    })
}

/// Runs one solver; numerical failures map to `None`.
fn run_solver<T: Scalar, E: MeasurementOperator<T>>(
    kind: SolverKind,
    op: &E,
    y: &[f64],
    cfg: &SolverConfig,
) -> Result<Option<Vec<T>>, HarnessError> {
    let out = match kind {
        SolverKind::Twf => solve_twf(op, y, cfg, None),
        SolverKind::Wf => solve_wf(op, y, cfg, None),
        SolverKind::Oracle => {
            return Err(HarnessError::Invalid("the oracle solver needs real data".into()))
        }
    };
    match out {
        Ok((z, _)) => Ok(Some(z)),
        Err(e) if is_numerical_failure(&e) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header plus rendered rows of one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

pub fn table<R: CsvRow>(rows: &[R]) -> Table {
    Table {
        header: R::HEADER.to_vec(),
        rows: rows.iter().map(CsvRow::record).collect(),
    }
}

// ---------------------------------------------------------------- phase transition

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub design: Design,
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub solver: SolverKind,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Median final relative error; failed trials count as `inf`.
    pub median_rel_error: f64,
    pub seed: u64,
}

impl CsvRow for PhaseRow {
    const HEADER: &'static [&'static str] = &[
        "design",
        "n",
        "m",
        "ratio",
        "solver",
        "trials",
        "successes",
        "success_rate",
        "median_rel_error",
        "seed",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.design.as_str().into(),
            self.n.to_string(),
            self.m.to_string(),
            self.ratio.to_string(),
            self.solver.as_str().into(),
            self.trials.to_string(),
            self.successes.to_string(),
            self.success_rate.to_string(),
            self.median_rel_error.to_string(),
            self.seed.to_string(),
        ]
    }
}

struct PhaseRunner<'a> {
    spec: &'a ExperimentSpec,
}

impl TrialRunner for PhaseRunner<'_> {
    /// Final relative error per solver; `inf` on numerical failure.
    type Out = Vec<f64>;

    fn run<T: Scalar, E: MeasurementOperator<T>>(
        &self,
        op: &E,
        x: &[T],
        seeds: &TrialSeeds,
    ) -> Result<Vec<f64>, HarnessError> {
        let y = op.intensities(x)?;
        let cfg = self.spec.config.clone().with_seed(seeds.init);
        self.spec
            .solvers
            .iter()
            .map(|&s| {
                Ok(match run_solver(s, op, &y, &cfg)? {
                    Some(z) => relative_error(&z, x)?,
                    None => f64::INFINITY,
                })
            })
            .collect()
    }
}

pub fn run_phase_transition(spec: &ExperimentSpec) -> Result<Vec<PhaseRow>, HarnessError> {
    spec.validate()?;
    let pool = thread_pool()?;
    let runner = PhaseRunner { spec };
    let mut rows = Vec::new();
    for &n in &spec.ns {
        for &ratio in &spec.ratios {
            let m = spec.num_measurements(n, ratio)?;
            let results = run_cell(&pool, spec, n, ratio, 0.0, &runner)?;
            for (k, &solver) in spec.solvers.iter().enumerate() {
                let errs: Vec<f64> = results.iter().map(|r| r[k]).collect();
                let successes = errs.iter().filter(|&&e| e <= SUCCESS_TOL).count();
                rows.push(PhaseRow {
                    design: spec.design,
                    n,
                    m,
                    ratio,
                    solver,
                    trials: spec.trials,
                    successes,
                    success_rate: successes as f64 / spec.trials as f64,
                    median_rel_error: median(errs),
                    seed: spec.seed,
                });
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- MSE vs SNR

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub design: Design,
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub snr_db: f64,
    pub solver: SolverKind,
    pub trials: usize,
    /// Trials that ended in a numerical failure; excluded from the mean.
    pub failures: usize,
    pub mean_rel_mse: f64,
    pub rel_mse_db: f64,
    pub x_norm: f64,
    /// `‖x‖ < log^1.5 m`, below the regime covered by the Poisson error bound.
    pub below_log_regime: bool,
    pub seed: u64,
}

impl CsvRow for MseRow {
    const HEADER: &'static [&'static str] = &[
        "design",
        "n",
        "m",
        "ratio",
        "snr_db",
        "solver",
        "trials",
        "failures",
        "mean_rel_mse",
        "rel_mse_db",
        "x_norm",
        "below_log_regime",
        "seed",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.design.as_str().into(),
            self.n.to_string(),
            self.m.to_string(),
            self.ratio.to_string(),
            self.snr_db.to_string(),
            self.solver.as_str().into(),
            self.trials.to_string(),
            self.failures.to_string(),
            self.mean_rel_mse.to_string(),
            self.rel_mse_db.to_string(),
            self.x_norm.to_string(),
            self.below_log_regime.to_string(),
            self.seed.to_string(),
        ]
    }
}

struct MseRunner<'a> {
    spec: &'a ExperimentSpec,
    snr_db: f64,
}

impl MseRunner<'_> {
    fn observe<T: Scalar, E: MeasurementOperator<T>>(
        &self,
        op: &E,
        x: &[T],
        seeds: &TrialSeeds,
    ) -> Result<(Vec<T>, Vec<f64>), HarnessError> {
        let x = scaled(norm_for_snr_db(self.snr_db) / twf_core::scalar::norm(x), x);
        let y = observe(&op.intensities(&x)?, &NoiseSpec::Poisson, seeds.noise)?;
        Ok((x, y))
    }
}

impl TrialRunner for MseRunner<'_> {
    /// Relative MSE per solver; `None` on numerical failure.
    type Out = Vec<Option<f64>>;

    fn run<T: Scalar, E: MeasurementOperator<T>>(
        &self,
        op: &E,
        x: &[T],
        seeds: &TrialSeeds,
    ) -> Result<Vec<Option<f64>>, HarnessError> {
        let (x, y) = self.observe(op, x, seeds)?;
        let cfg = self.spec.config.clone().with_seed(seeds.init);
        self.spec
            .solvers
            .iter()
            .map(|&s| match run_solver(s, op, &y, &cfg)? {
                Some(z) => Ok(Some(relative_mse(&z, &x)?)),
                None => Ok(None),
            })
            .collect()
    }

    fn run_real(
        &self,
        op: &DenseEnsemble<f64>,
        x: &[f64],
        seeds: &TrialSeeds,
    ) -> Result<Vec<Option<f64>>, HarnessError> {
        let (x, y) = self.observe(op, x, seeds)?;
        let cfg = self.spec.config.clone().with_seed(seeds.init);
        let mut out = Vec::with_capacity(self.spec.solvers.len());
        for &s in &self.spec.solvers {
            let z = if s == SolverKind::Oracle {
                let signs: Vec<f64> = op
                    .forward(&x)?
                    .iter()
                    .map(|v| if *v < 0.0 { -1.0 } else { 1.0 })
                    .collect();
                match solve_phase_oracle_mle(op, &y, &signs, &OracleConfig::default()) {
                    Ok(sol) => Some(sol.z),
                    Err(e) if is_numerical_failure(&e) => None,
                    Err(e) => return Err(e.into()),
                }
            } else {
                run_solver(s, op, &y, &cfg)?
            };
            out.push(match z {
                Some(z) => Some(relative_mse(&z, &x)?),
                None => None,
            });
        }
        Ok(out)
    }
}

pub fn run_mse_vs_snr(spec: &ExperimentSpec) -> Result<Vec<MseRow>, HarnessError> {
    spec.validate()?;
    let pool = thread_pool()?;
    let mut rows = Vec::new();
    for &n in &spec.ns {
        for &ratio in &spec.ratios {
            let m = spec.num_measurements(n, ratio)?;
            for &snr in &spec.snr_db {
                let runner = MseRunner { spec, snr_db: snr };
                let results = run_cell(&pool, spec, n, ratio, snr, &runner)?;
                let x_norm = norm_for_snr_db(snr);
                for (k, &solver) in spec.solvers.iter().enumerate() {
                    let ok: Vec<f64> = results.iter().filter_map(|r| r[k]).collect();
                    let mean_rel_mse = mean(&ok);
                    rows.push(MseRow {
                        design: spec.design,
                        n,
                        m,
                        ratio,
                        snr_db: snr,
                        solver,
                        trials: spec.trials,
                        failures: spec.trials - ok.len(),
                        mean_rel_mse,
                        rel_mse_db: 10.0 * mean_rel_mse.log10(),
                        x_norm,
                        below_log_regime: x_norm < (m as f64).ln().powf(1.5),
                        seed: spec.seed,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Least-squares slope of `rel_mse_db` against `snr_db`.
pub fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------- init comparison

#[derive(Debug, Clone, PartialEq)]
pub struct InitRow {
    pub design: Design,
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub trials: usize,
    pub truncated_mean_error: f64,
    pub plain_mean_error: f64,
    pub seed: u64,
}

impl CsvRow for InitRow {
    const HEADER: &'static [&'static str] = &[
        "design",
        "n",
        "m",
        "ratio",
        "trials",
        "truncated_mean_error",
        "plain_mean_error",
        "seed",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.design.as_str().into(),
            self.n.to_string(),
            self.m.to_string(),
            self.ratio.to_string(),
            self.trials.to_string(),
            self.truncated_mean_error.to_string(),
            self.plain_mean_error.to_string(),
            self.seed.to_string(),
        ]
    }
}

struct InitRunner<'a> {
    spec: &'a ExperimentSpec,
}

impl TrialRunner for InitRunner<'_> {
    type Out = (f64, f64);

    fn run<T: Scalar, E: MeasurementOperator<T>>(
        &self,
        op: &E,
        x: &[T],
        seeds: &TrialSeeds,
    ) -> Result<(f64, f64), HarnessError> {
        let y = op.intensities(x)?;
        let base = InitConfig {
            alpha_y: self.spec.config.params.alpha_y,
            seed: seeds.init,
            ..self.spec.config.init.clone()
        };
        let truncated = spectral_init(op, &y, &InitConfig { truncated: true, ..base.clone() })?;
        let plain = spectral_init(op, &y, &InitConfig { truncated: false, ..base })?;
        Ok((relative_error(&truncated.z0, x)?, relative_error(&plain.z0, x)?))
    }
}

pub fn run_init_compare(spec: &ExperimentSpec) -> Result<Vec<InitRow>, HarnessError> {
    spec.validate()?;
    let pool = thread_pool()?;
    let runner = InitRunner { spec };
    let mut rows = Vec::new();
    for &n in &spec.ns {
        for &ratio in &spec.ratios {
            let m = spec.num_measurements(n, ratio)?;
            let results = run_cell(&pool, spec, n, ratio, 0.0, &runner)?;
            let trunc: Vec<f64> = results.iter().map(|r| r.0).collect();
            let plain: Vec<f64> = results.iter().map(|r| r.1).collect();
            rows.push(InitRow {
                design: spec.design,
                n,
                m,
                ratio,
                trials: spec.trials,
                truncated_mean_error: mean(&trunc),
                plain_mean_error: mean(&plain),
                seed: spec.seed,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- CG comparison

/// Matrix-vector products spent by TWF after `iters` iterations: two per
/// power iteration, one for the product of the start, two per update.
pub fn twf_matvecs(power_iters: usize, iters: usize) -> usize {
    2 * power_iters + 1 + 2 * iters
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgRow {
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub trial_seed: u64,
    pub condition_number: f64,
    pub cg_iters_to_tol: Option<usize>,
    pub cg_matvecs_to_tol: Option<usize>,
    pub twf_iters_to_tol: Option<usize>,
    pub twf_matvecs_to_tol: Option<usize>,
    pub matvec_ratio: Option<f64>,
}

impl CsvRow for CgRow {
    const HEADER: &'static [&'static str] = &[
        "n",
        "m",
        "trial",
        "trial_seed",
        "condition_number",
        "cg_iters_to_tol",
        "cg_matvecs_to_tol",
        "twf_iters_to_tol",
        "twf_matvecs_to_tol",
        "matvec_ratio",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.m.to_string(),
            self.trial.to_string(),
            self.trial_seed.to_string(),
            self.condition_number.to_string(),
            fmt_opt(self.cg_iters_to_tol),
            fmt_opt(self.cg_matvecs_to_tol),
            fmt_opt(self.twf_iters_to_tol),
            fmt_opt(self.twf_matvecs_to_tol),
            fmt_opt(self.matvec_ratio),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub trial: usize,
    pub solver: &'static str,
    pub iteration: usize,
    pub matvecs: usize,
    pub relative_error: f64,
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] =
        &["n", "trial", "solver", "iteration", "matvecs", "relative_error"];

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.trial.to_string(),
            self.solver.into(),
            self.iteration.to_string(),
            self.matvecs.to_string(),
            self.relative_error.to_string(),
        ]
    }
}

struct CgRunner<'a> {
    spec: &'a ExperimentSpec,
}

impl TrialRunner for CgRunner<'_> {
    type Out = (CgRow, Vec<TraceRow>);

    fn run<T: Scalar, E: MeasurementOperator<T>>(
        &self,
        _op: &E,
        _x: &[T],
        _seeds: &TrialSeeds,
    ) -> Result<Self::Out, HarnessError> {
        Err(HarnessError::Invalid("cg-compare needs the gaussian-real design".into()))
    }

    fn run_real(
        &self,
        op: &DenseEnsemble<f64>,
        x: &[f64],
        seeds: &TrialSeeds,
    ) -> Result<Self::Out, HarnessError> {
        debug_assert_eq!(f64::FIELD, Field::Real);
        let n = op.dim();
        let b = op.forward(x)?;
        let (_, cg) = solve_cg_normal(op, &b, CG_TOL, CG_MAX_ITERS, Some(x))?;
        let y = op.intensities(x)?;
        let cfg = self.spec.config.clone().with_seed(seeds.init);
        let power = cfg.init.power_iters;
        let (_, twf) = solve_twf(op, &y, &cfg, Some(x))?;

        let cg_hit = cg
            .records
            .iter()
            .find(|r| r.relative_error.is_some_and(|e| e <= SUCCESS_TOL));
        let twf_iters = twf.first_below(SUCCESS_TOL);
        let cg_matvecs = cg_hit.map(|r| r.matvecs);
        let twf_mv = twf_iters.map(|k| twf_matvecs(power, k));
        let ratio = match (twf_mv, cg_matvecs) {
            (Some(a), Some(b)) if b > 0 => Some(a as f64 / b as f64),
            _ => None,
        };

        let mut trace = Vec::with_capacity(cg.records.len() + twf.records.len() + 1);
        for r in &cg.records {
            if let Some(e) = r.relative_error {
                trace.push(TraceRow {
                    n,
                    trial: 0,
                    solver: "cg",
                    iteration: r.t,
                    matvecs: r.matvecs,
                    relative_error: e,
                });
            }
        }
        if let Some(e) = twf.init_relative_error {
            trace.push(TraceRow {
                n,
                trial: 0,
                solver: "twf",
                iteration: 0,
                matvecs: twf_matvecs(power, 0),
                relative_error: e,
            });
        }
        for (k, r) in twf.records.iter().enumerate() {
            if let Some(e) = r.relative_error {
                trace.push(TraceRow {
                    n,
                    trial: 0,
                    solver: "twf",
                    iteration: k + 1,
                    matvecs: twf_matvecs(power, k + 1),
                    relative_error: e,
                });
            }
        }
        let row = CgRow {
            n,
            m: op.num_measurements(),
            trial: 0,
            trial_seed: seeds.trial,
            condition_number: gram_condition_number(op),
            cg_iters_to_tol: cg_hit.map(|r| r.t),
            cg_matvecs_to_tol: cg_matvecs,
            twf_iters_to_tol: twf_iters,
            twf_matvecs_to_tol: twf_mv,
            matvec_ratio: ratio,
        };
        Ok((row, trace))
    }
}

pub fn run_cg_compare(spec: &ExperimentSpec) -> Result<(Vec<CgRow>, Vec<TraceRow>), HarnessError> {
    spec.validate()?;
    let pool = thread_pool()?;
    let runner = CgRunner { spec };
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &n in &spec.ns {
        for &ratio in &spec.ratios {
            let results = run_cell(&pool, spec, n, ratio, 0.0, &runner)?;
            for (t, (mut row, trace)) in results.into_iter().enumerate() {
                row.trial = t;
                rows.push(row);
                traces.extend(trace.into_iter().map(|mut r| {
                    r.trial = t;
                    r
                }));
            }
        }
    }
    Ok((rows, traces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_counts() {
        let mut spec = ExperimentSpec::new(ExperimentKind::PhaseTransition);
        assert_eq!(spec.num_measurements(10, 4.5).unwrap(), 45);
        assert_eq!(spec.num_measurements(10, 0.5).unwrap(), 5);
        assert!(spec.num_measurements(10, 0.0).is_err());
        spec.design = Design::Cdp;
        assert_eq!(spec.num_measurements(16, 3.0).unwrap(), 48);
        assert!(spec.num_measurements(16, 2.5).is_err());
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut spec = ExperimentSpec::new(ExperimentKind::PhaseTransition);
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(ExperimentKind::PhaseTransition);
        spec.ns.clear();
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(ExperimentKind::MseVsSnr);
        spec.solvers.push(SolverKind::Oracle);
        assert!(spec.validate().is_ok());
        spec.design = Design::GaussianComplex;
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(ExperimentKind::CgCompare);
        spec.design = Design::Cdp;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn trial_seeds_depend_on_every_coordinate() {
        let spec = ExperimentSpec::new(ExperimentKind::PhaseTransition);
        let a = spec.trial_seeds(16, 4.0, 0.0, 0);
        assert_eq!(a, spec.trial_seeds(16, 4.0, 0.0, 0));
        assert_ne!(a.trial, spec.trial_seeds(16, 4.0, 0.0, 1).trial);
        assert_ne!(a.trial, spec.trial_seeds(32, 4.0, 0.0, 0).trial);
        assert_ne!(a.trial, spec.trial_seeds(16, 5.0, 0.0, 0).trial);
        let mut other = spec.clone();
        other.seed = 2;
        assert_ne!(a.trial, other.trial_seeds(16, 4.0, 0.0, 0).trial);
        assert_ne!(a.ensemble, a.signal);
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 3.0 - 2.0 * k as f64)).collect();
        assert!((fitted_slope(&pts) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn median_handles_even_and_infinite() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
    }
}
