use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twf_core::baselines::{gram_condition_number, solve_cg_normal, solve_phase_oracle_mle, CgStatus, OracleConfig};
use twf_core::measurement::{DenseEnsemble, MeasurementOperator};
use twf_core::metrics::relative_error;
use twf_core::scalar::{diff_norm, norm, sample_gaussian_vector};

fn real_instance(n: usize, m: usize, seed: u64) -> (DenseEnsemble<f64>, Vec<f64>) {
    let op = DenseEnsemble::<f64>::sample_gaussian(n, m, seed).unwrap();
    let x: Vec<f64> = sample_gaussian_vector(n, &mut ChaCha8Rng::seed_from_u64(seed ^ 0xC0DE));
    (op, x)
}

#[test]
fn cg_residual_is_monotone_and_reaches_tolerance() {
    for seed in 0..5 {
        let (op, x) = real_instance(64, 512, seed);
        let b = op.forward(&x).unwrap();
        let (z, trace) = solve_cg_normal(&op, &b, 1e-10, 100, Some(&x)).unwrap();
        assert_eq!(trace.status, CgStatus::Converged);
        for w in trace.records.windows(2) {
            assert!(w[1].residual_norm <= w[0].residual_norm * (1.0 + 1e-12));
        }
        let atb = norm(&op.adjoint(&b).unwrap());
        assert!(trace.records.last().unwrap().normal_residual_norm <= 1e-10 * atb);
        assert!(diff_norm(&z, &x) <= 1e-8 * norm(&x));
        assert_eq!(trace.matvec_count, 1 + 2 * trace.records.last().unwrap().t);
        // κ ≈ 4.4 gives a contraction near 0.52 per iteration.
        assert!(trace.records.iter().find(|r| r.relative_error.unwrap() <= 1e-5).unwrap().t <= 12);
    }
}

#[test]
fn gram_condition_number_near_marchenko_pastur() {
    let r: f64 = (1.0f64 / 8.0).sqrt();
    let mp = ((1.0 + r) / (1.0 - r)).powi(2);
    assert!((mp - 4.38).abs() < 0.01);
    let (op, _) = real_instance(256, 2048, 1);
    let k = gram_condition_number(&op);
    assert!((3.5..=5.5).contains(&k), "{k}");
}

#[test]
fn oracle_recovers_noiseless_signal() {
    for seed in 0..3 {
        let (op, x) = real_instance(20, 160, 10 + seed);
        let ax = op.forward(&x).unwrap();
        let y: Vec<f64> = ax.iter().map(|v| v * v).collect();
        let signs: Vec<f64> = ax.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        let sol = solve_phase_oracle_mle(&op, &y, &signs, &OracleConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(relative_error(&sol.z, &x).unwrap() <= 1e-6);
        for w in sol.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }
}
