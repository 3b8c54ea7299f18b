use rfspectrum::gmm::{class_statistics, estimate_tau, presets, sample_mixture};

#[test]
fn tau_estimate_tracks_model_value_on_spiked_mixture() {
    let model = presets::fig1(512);
    for seed in 0..5 {
        let data = sample_mixture(&model, 256, seed).unwrap();
        let stats = class_statistics(&model, &data.class_sizes).unwrap();
        let est = estimate_tau(&data.x).unwrap();
        assert!((est - stats.tau).abs() <= 0.1, "seed {seed}: {est} vs {}", stats.tau);
    }
}

#[test]
fn spread_covariance_tau_is_the_average_trace() {
    let p = 512;
    let model = presets::fig3(p);
    let stats = class_statistics(&model, &[128, 128]).unwrap();
    let expected = 1.0 + 15.0 / (2.0 * (p as f64).sqrt());
    assert!((stats.tau - expected).abs() < 1e-12);
    // tr(C_a − C°)/√p = ∓(15/(2√p))·p/√p = ∓7.5.
    let half_gap = 7.5;
    assert!((stats.t[0] + half_gap).abs() < 1e-10);
    assert!((stats.t[1] - half_gap).abs() < 1e-10);
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    let model = presets::fig5(32);
    let a = sample_mixture(&model, 40, 17).unwrap();
    let b = sample_mixture(&model, 40, 17).unwrap();
    let c = sample_mixture(&model, 40, 18).unwrap();
    assert_eq!(a.x, b.x);
    assert_ne!(a.x, c.x);
    assert_eq!(a.class_sizes, vec![10; 4]);
}
