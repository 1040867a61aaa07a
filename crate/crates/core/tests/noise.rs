use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twf_core::noise::{norm_for_snr_db, observe, sample_poisson, snr_db, NoiseSpec};

#[test]
fn poisson_sample_means() {
    let draws = 100_000;
    for (k, &c) in [0.3, 4.0, 29.5, 30.0, 75.0, 1e4].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mean = (0..draws).map(|_| sample_poisson(c, &mut rng) as f64).sum::<f64>() / draws as f64;
        assert!((mean - c).abs() <= 4.0 * (c / draws as f64).sqrt(), "λ = {c}: {mean}");
    }
}

#[test]
fn observe_is_reproducible() {
    let mu = vec![0.5, 3.0, 40.0, 200.0];
    let a = observe(&mu, &NoiseSpec::Poisson, 9).unwrap();
    assert_eq!(a, observe(&mu, &NoiseSpec::Poisson, 9).unwrap());
    assert!(a.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
    assert_eq!(observe(&mu, &NoiseSpec::Noiseless, 9).unwrap(), mu);
}

#[test]
fn snr_targets_round_trip() {
    for db in [15.0, 25.0, 35.0, 45.0, 55.0] {
        let r = norm_for_snr_db(db);
        let x = [r, 0.0];
        assert!((snr_db(&x).unwrap() - db).abs() < 1e-10);
    }
}
