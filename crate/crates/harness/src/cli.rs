//! `twf` command line. Exit codes: 0 on success, 2 on invalid arguments,
//! 1 on runtime failure.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use twf_core::measurement::{CdpEnsemble, DenseEnsemble, Design, MeasurementOperator};
use twf_core::metrics::{align, relative_error};
use twf_core::noise::{norm_for_snr_db, observe, NoiseSpec};
use twf_core::scalar::{norm, scaled, Field, Scalar};
use twf_core::solver::{
    solve_twf, solve_wf, validate_params, SolverConfig, SolverTrace, StepMode, StepPolicy,
    TruncationParams,
};

use crate::config::read_config;
use crate::experiments::{
    draw_signal, run_cg_compare, run_init_compare, run_mse_vs_snr, run_phase_transition, table,
    ExperimentKind, ExperimentSpec, SolverKind,
};
use crate::output::write_table_to;
use crate::seeds::derive_seed;
use crate::HarnessError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub fn parse_step(s: &str) -> Result<StepPolicy, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("expected fixed:MU or backtrack:BETA, got '{s}'"))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("invalid number '{value}' in step '{s}'"))?;
    match kind.trim() {
        "fixed" => Ok(StepPolicy::Fixed(v)),
        "backtrack" => Ok(StepPolicy::Backtracking { beta: v }),
        other => Err(format!("unknown step kind '{other}' (expected fixed or backtrack)")),
    }
}

pub fn parse_params(s: &str) -> Result<TruncationParams, String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected five comma-separated numbers, got '{s}'"))?;
    let [lb, ub, h, y, p] = vals[..] else {
        return Err(format!("expected five comma-separated numbers, got '{s}'"));
    };
    Ok(TruncationParams {
        alpha_z_lb: lb,
        alpha_z_ub: ub,
        alpha_h: h,
        alpha_y: y,
        alpha_p: p,
    })
}

#[derive(Debug, Clone, Copy)]
struct StepArg(StepPolicy);

impl FromStr for StepArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_step(s).map(StepArg)
    }
}

#[derive(Debug, Clone, Copy)]
struct ParamsArg(TruncationParams);

impl FromStr for ParamsArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_params(s).map(ParamsArg)
    }
}

#[derive(Parser, Debug)]
#[command(name = "twf", version, about = "Truncated Wirtinger Flow phase retrieval experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Success rate of exact recovery over an (n, m/n) grid.
    PhaseTransition(ExperimentArgs),
    /// Relative MSE under Poisson noise over an SNR grid.
    MseVsSnr(ExperimentArgs),
    /// Truncated vs plain spectral initialization error.
    InitCompare(ExperimentArgs),
    /// Matrix-vector products to reach 1e-5: TWF vs CG least squares.
    CgCompare(ExperimentArgs),
    /// Solve one seeded instance and print the final error.
    Solve(SolveArgs),
    /// Print the step-size bound and admissibility of trimming thresholds.
    ValidateParams(ValidateArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// key = value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    design: Option<Design>,
    /// Number of CDP masks; sets m = n * L.
    #[arg(long)]
    masks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// fixed:MU or backtrack:BETA
    #[arg(long)]
    step: Option<StepArg>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// alpha_z_lb,alpha_z_ub,alpha_h,alpha_y,alpha_p
    #[arg(long)]
    params: Option<ParamsArg>,
    #[arg(long)]
    power_iters: Option<usize>,
    /// Reject thresholds or step sizes outside the admissible range.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    ratio: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// twf, wf, oracle (comma-separated)
    #[arg(long, value_delimiter = ',')]
    solvers: Vec<SolverKind>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration error traces (cg-compare only).
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    /// Poisson data at this SNR; noiseless when absent.
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    solver: Option<SolverKind>,
    /// Write the aligned estimate as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    params: Option<ParamsArg>,
    #[arg(long)]
    step: Option<StepArg>,
}

/// Command-line values layered over an optional config file.
struct Layer {
    cfg: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Layer {
    fn load(path: Option<&Path>) -> Result<Self, HarnessError> {
        let cfg = match path {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        Ok(Layer {
            cfg,
            used: BTreeSet::new(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.cfg.get(key).cloned()
    }

    fn one<T: FromStr>(&mut self, cli: Option<T>, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: Display,
    {
        let from_file = self.raw(key);
        if cli.is_some() {
            return Ok(cli);
        }
        from_file
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| HarnessError::Config(format!("{key}: {e}")))
            })
            .transpose()
    }

    fn list<T: FromStr>(&mut self, cli: Vec<T>, key: &str) -> Result<Option<Vec<T>>, HarnessError>
    where
        T::Err: Display,
    {
        let from_file = self.raw(key);
        if !cli.is_empty() {
            return Ok(Some(cli));
        }
        from_file
            .map(|s| {
                s.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<T>()
                            .map_err(|e| HarnessError::Config(format!("{key}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn flag(&mut self, cli: bool, key: &str) -> Result<bool, HarnessError> {
        Ok(cli || self.one::<bool>(None, key)?.unwrap_or(false))
    }

    fn finish(self) -> Result<(), HarnessError> {
        let unknown: Vec<&String> = self.cfg.keys().filter(|k| !self.used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("unknown keys: {unknown:?}")))
        }
    }
}

/// Applies the solver-related flags shared by every subcommand.
fn apply_common(
    layer: &mut Layer,
    c: &CommonArgs,
    cfg: &mut SolverConfig,
) -> Result<(Option<Design>, Option<usize>, Option<u64>), HarnessError> {
    let design = layer.one(c.design, "design")?;
    let masks = layer.one(c.masks, "masks")?;
    let seed = layer.one(c.seed, "seed")?;
    if let Some(StepArg(s)) = layer.one(c.step, "step")? {
        cfg.step = s;
    }
    if let Some(k) = layer.one(c.max_iters, "max-iters")? {
        cfg.max_iters = k;
    }
    match layer.one(c.params, "params")? {
        Some(ParamsArg(p)) => cfg.params = p,
        None if cfg.step.mode() == StepMode::LineSearch => {
            cfg.params = TruncationParams::line_search_defaults()
        }
        None => {}
    }
    if let Some(k) = layer.one(c.power_iters, "power-iters")? {
        cfg.init.power_iters = k;
    }
    cfg.strict = layer.flag(c.strict, "strict")?;
    if masks.is_some() && design.is_some_and(|d| d != Design::Cdp) {
        return Err(HarnessError::Invalid("--masks only applies to the cdp design".into()));
    }
    Ok((design.or(masks.map(|_| Design::Cdp)), masks, seed))
}

fn experiment_spec(
    kind: ExperimentKind,
    a: ExperimentArgs,
) -> Result<(ExperimentSpec, PathBuf, Option<PathBuf>), HarnessError> {
    let mut layer = Layer::load(a.common.config.as_deref())?;
    let mut spec = ExperimentSpec::new(kind);
    let (design, masks, seed) = apply_common(&mut layer, &a.common, &mut spec.config)?;
    if let Some(d) = design {
        spec.design = d;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(v) = layer.list(a.n, "n")? {
        spec.ns = v;
    }
    if let Some(v) = layer.list(a.ratio, "ratio")? {
        spec.ratios = v;
    }
    if let Some(l) = masks {
        spec.ratios = vec![l as f64];
    }
    if let Some(v) = layer.list(a.snr_db, "snr-db")? {
        spec.snr_db = v;
    }
    if let Some(t) = layer.one(a.trials, "trials")? {
        spec.trials = t;
    }
    if let Some(v) = layer.list(a.solvers, "solvers")? {
        spec.solvers = v;
    }
    let out = layer.one(a.out, "out")?;
    let trace_out = layer.one(a.trace_out, "trace-out")?;
    layer.finish()?;
    let out = out.ok_or_else(|| HarnessError::Invalid("--out PATH is required".into()))?;
    if trace_out.is_some() && kind != ExperimentKind::CgCompare {
        return Err(HarnessError::Invalid("--trace-out only applies to cg-compare".into()));
    }
    spec.validate()?;
    Ok((spec, out, trace_out))
}

fn run_experiment(kind: ExperimentKind, a: ExperimentArgs) -> Result<(), HarnessError> {
    let (spec, out, trace_out) = experiment_spec(kind, a)?;
    for w in spec.config.check()? {
        eprintln!("warning: {w}");
    }
    match kind {
        ExperimentKind::PhaseTransition => {
            write_table_to(&table(&run_phase_transition(&spec)?), &spec, &out)?
        }
        ExperimentKind::MseVsSnr => write_table_to(&table(&run_mse_vs_snr(&spec)?), &spec, &out)?,
        ExperimentKind::InitCompare => {
            write_table_to(&table(&run_init_compare(&spec)?), &spec, &out)?
        }
        ExperimentKind::CgCompare => {
            let (rows, traces) = run_cg_compare(&spec)?;
            write_table_to(&table(&rows), &spec, &out)?;
            if let Some(p) = trace_out {
                write_table_to(&table(&traces), &spec, &p)?;
            }
        }
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

struct SolveReport {
    m: usize,
    trace: SolverTrace,
    final_error: f64,
    estimate: Vec<(f64, f64)>,
}

fn solve_instance<T: Scalar, E: MeasurementOperator<T>>(
    op: &E,
    x: &[T],
    snr_db: Option<f64>,
    noise_seed: u64,
    solver: SolverKind,
    cfg: &SolverConfig,
) -> Result<SolveReport, HarnessError> {
    let x = match snr_db {
        Some(db) => scaled(norm_for_snr_db(db) / norm(x), x),
        None => x.to_vec(),
    };
    let mu = op.intensities(&x)?;
    let y = match snr_db {
        Some(_) => observe(&mu, &NoiseSpec::Poisson, noise_seed)?,
        None => mu,
    };
    let (z, trace) = match solver {
        SolverKind::Twf => solve_twf(op, &y, cfg, Some(&x))?,
        SolverKind::Wf => solve_wf(op, &y, cfg, Some(&x))?,
        SolverKind::Oracle => {
            return Err(HarnessError::Invalid("solve supports the twf and wf solvers".into()))
        }
    };
    let aligned = align(&z, &x)?;
    Ok(SolveReport {
        m: op.num_measurements(),
        trace,
        final_error: relative_error(&z, &x)?,
        estimate: aligned
            .z_aligned
            .iter()
            .map(|v| match T::FIELD {
                Field::Real => (v.re(), 0.0),
                Field::Complex => (v.re(), v.rotate(-std::f64::consts::FRAC_PI_2).re()),
            })
            .collect(),
    })
}

fn run_solve(a: SolveArgs) -> Result<(), HarnessError> {
    let mut layer = Layer::load(a.common.config.as_deref())?;
    let mut cfg = SolverConfig::default();
    let (design, masks, seed) = apply_common(&mut layer, &a.common, &mut cfg)?;
    let design = design.unwrap_or(Design::GaussianReal);
    let seed = seed.unwrap_or(1);
    let n = layer.one(a.n, "n")?.unwrap_or(64);
    let ratio = layer.one(a.ratio, "ratio")?.unwrap_or(8.0);
    let snr_db = layer.one(a.snr_db, "snr-db")?;
    let solver = layer.one(a.solver, "solver")?.unwrap_or(SolverKind::Twf);
    let out = layer.one(a.out, "out")?;
    layer.finish()?;

    let mut spec = ExperimentSpec::new(ExperimentKind::PhaseTransition);
    spec.design = design;
    let m = match masks {
        Some(l) => n * l,
        None => spec.num_measurements(n, ratio)?,
    };
    if n == 0 || m == 0 {
        return Err(HarnessError::Invalid("n and m must be >= 1".into()));
    }
    let cfg = cfg.with_seed(derive_seed(seed, &[4]));
    for w in cfg.check()? {
        eprintln!("warning: {w}");
    }
    let (ens, sig, noise) = (derive_seed(seed, &[1]), derive_seed(seed, &[2]), derive_seed(seed, &[3]));
    let report = match design {
        Design::GaussianReal => {
            let op = DenseEnsemble::<f64>::sample_gaussian(n, m, ens)?;
            solve_instance(&op, &draw_signal::<f64>(n, sig), snr_db, noise, solver, &cfg)?
        }
        Design::GaussianComplex => {
            let op = DenseEnsemble::<twf_core::Complex64>::sample_gaussian(n, m, ens)?;
            solve_instance(&op, &draw_signal(n, sig), snr_db, noise, solver, &cfg)?
        }
        Design::Cdp => {
            let op = CdpEnsemble::sample(n, m / n, ens)?;
            solve_instance(&op, &draw_signal(n, sig), snr_db, noise, solver, &cfg)?
        }
    };
    println!(
        "design={} n={} m={} solver={} seed={} status={} iterations={} init_relative_error={} final_relative_error={:e}",
        design.as_str(),
        n,
        report.m,
        solver.as_str(),
        seed,
        report.trace.status.as_str(),
        report.trace.records.len(),
        report.trace.init_relative_error.unwrap_or(f64::NAN),
        report.final_error,
    );
    if let Some(path) = out {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        w.write_record(["index", "re", "im"])?;
        for (i, (re, im)) in report.estimate.iter().enumerate() {
            w.write_record([i.to_string(), re.to_string(), im.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn run_validate(a: ValidateArgs) -> Result<(), HarnessError> {
    let step = a.step.map(|s| s.0).unwrap_or(StepPolicy::Fixed(0.2));
    let mode = step.mode();
    let params = match (a.params, mode) {
        (Some(p), _) => p.0,
        (None, StepMode::Fixed) => TruncationParams::default(),
        (None, StepMode::LineSearch) => TruncationParams::line_search_defaults(),
    };
    let c = validate_params(&params, mode);
    let mode_str = match mode {
        StepMode::Fixed => "fixed",
        StepMode::LineSearch => "line-search",
    };
    println!(
        "mode={mode_str} params={},{},{},{},{} zeta1={:.6} zeta2={:.6} mu0={:.6} ok={}",
        params.alpha_z_lb, params.alpha_z_ub, params.alpha_h, params.alpha_y, params.alpha_p,
        c.zeta1, c.zeta2, c.mu0, c.ok
    );
    if let StepPolicy::Fixed(mu) = step {
        if mu > c.mu0 {
            eprintln!("warning: step size {mu} exceeds mu0 = {:.6}", c.mu0);
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::PhaseTransition(a) => run_experiment(ExperimentKind::PhaseTransition, a),
        Command::MseVsSnr(a) => run_experiment(ExperimentKind::MseVsSnr, a),
        Command::InitCompare(a) => run_experiment(ExperimentKind::InitCompare, a),
        Command::CgCompare(a) => run_experiment(ExperimentKind::CgCompare, a),
        Command::Solve(a) => run_solve(a),
        Command::ValidateParams(a) => run_validate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_parsing() {
        assert_eq!(parse_step("fixed:0.2").unwrap(), StepPolicy::Fixed(0.2));
        assert_eq!(
            parse_step("backtrack:0.5").unwrap(),
            StepPolicy::Backtracking { beta: 0.5 }
        );
        assert!(parse_step("fixed").is_err());
        assert!(parse_step("newton:1").is_err());
        assert!(parse_step("fixed:abc").is_err());
    }

    #[test]
    fn params_parsing() {
        assert_eq!(parse_params("0.3,5,5,3,5").unwrap(), TruncationParams::default());
        assert!(parse_params("0.3,5,5,3").is_err());
        assert!(parse_params("0.3,5,x,3,5").is_err());
    }

    #[test]
    fn missing_out_is_a_usage_error() {
        assert_eq!(cli_main(["twf", "init-compare", "--n", "8"]), EXIT_USAGE);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(cli_main(["twf", "solve", "--bogus"]), EXIT_USAGE);
        assert_eq!(cli_main(["twf", "solve", "--design", "hexagonal"]), EXIT_USAGE);
    }
}
