use twf_core::measurement::{CountingOperator, DenseEnsemble, Design, MeasurementOperator};
use twf_core::scalar::sample_gaussian_vector;
use twf_core::solver::{solve_twf, SolverConfig};
use twf_harness::experiments::{
    run_init_compare, run_mse_vs_snr, twf_matvecs, ExperimentKind, ExperimentSpec, SolverKind,
};

use rand::SeedableRng;

#[test]
fn matvec_accounting_matches_counted_products() {
    let op = DenseEnsemble::<f64>::sample_gaussian(16, 128, 1).unwrap();
    let x: Vec<f64> = sample_gaussian_vector(16, &mut rand_chacha::ChaCha8Rng::seed_from_u64(2));
    let y = op.intensities(&x).unwrap();
    for iters in [0, 1, 7] {
        let counted = CountingOperator::new(&op);
        let mut cfg = SolverConfig { max_iters: iters, ..SolverConfig::default() };
        cfg.init.power_iters = 10;
        let (_, trace) = solve_twf(&counted, &y, &cfg, None).unwrap();
        assert_eq!(counted.total(), twf_matvecs(10, trace.records.len()));
    }
}

#[test]
fn zero_iterations_report_initialization_mse() {
    let mut spec = ExperimentSpec::new(ExperimentKind::MseVsSnr);
    spec.ns = vec![20];
    spec.snr_db = vec![30.0];
    spec.trials = 3;
    spec.config.max_iters = 0;
    let rows = run_mse_vs_snr(&spec).unwrap();
    let init = {
        let mut s = ExperimentSpec::new(ExperimentKind::InitCompare);
        s.ns = vec![20];
        s.ratios = vec![8.0];
        s.trials = 3;
        s
    };
    assert_eq!(rows.len(), 1);
    assert!(rows[0].mean_rel_mse.is_finite() && rows[0].mean_rel_mse > 0.0);
    // Initialization alone is far from the Poisson-limited accuracy.
    assert!(rows[0].rel_mse_db > -25.0, "{:?}", rows[0]);
    assert_eq!(run_init_compare(&init).unwrap().len(), 1);
}

#[test]
fn oracle_and_wf_columns_appear_when_enabled() {
    let mut spec = ExperimentSpec::new(ExperimentKind::MseVsSnr);
    spec.ns = vec![20];
    spec.snr_db = vec![25.0, 35.0];
    spec.trials = 2;
    spec.config.max_iters = 200;
    spec.solvers = vec![SolverKind::Twf, SolverKind::Oracle, SolverKind::Wf];
    let rows = run_mse_vs_snr(&spec).unwrap();
    let solvers: Vec<SolverKind> = rows.iter().map(|r| r.solver).collect();
    assert_eq!(
        solvers,
        [SolverKind::Twf, SolverKind::Oracle, SolverKind::Wf].repeat(2)
    );
    assert!(rows[0].below_log_regime && !rows[3].below_log_regime);
    for r in &rows {
        assert!(r.rel_mse_db.is_finite());
        assert_eq!(r.below_log_regime, r.x_norm < (r.m as f64).ln().powf(1.5));
    }
}

#[test]
fn huge_alpha_y_makes_init_columns_identical() {
    let mut spec = ExperimentSpec::new(ExperimentKind::InitCompare);
    spec.ns = vec![32];
    spec.trials = 3;
    spec.config.params.alpha_y = 1e6;
    let rows = run_init_compare(&spec).unwrap();
    assert_eq!(rows[0].truncated_mean_error, rows[0].plain_mean_error);
}

#[test]
fn cdp_truncated_init_beats_plain() {
    let mut spec = ExperimentSpec::new(ExperimentKind::InitCompare);
    spec.design = Design::Cdp;
    spec.ns = vec![256];
    spec.ratios = vec![12.0];
    spec.trials = 10;
    let rows = run_init_compare(&spec).unwrap();
    assert!(rows[0].truncated_mean_error < rows[0].plain_mean_error, "{:?}", rows[0]);
}
