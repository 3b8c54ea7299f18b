use rfspectrum::gmm::{presets, sample_mixture};
use rfspectrum::kernels::{center_matrix, phi_matrix, random_feature_gram, Activation};
use rfspectrum::rng::derive_rng;
use rfspectrum::spectrum::{eig_sym, esd_histogram, Histogram, ResolventModel, StieltjesOptions};

const DRAWS: u64 = 10;

/// Eigenvalues of the centered ReLU kernel of the spiked two-class mixture
/// (p = 512, T = 256), and of `DRAWS` random-feature Gram matrices with
/// `n = T`.
fn setting() -> (Vec<f64>, Vec<Vec<f64>>) {
    let data = sample_mixture(&presets::fig1(512), 256, 0).unwrap();
    let phi_c = center_matrix(&phi_matrix(Activation::Relu, &data.x).unwrap().values);
    let spectra = (0..DRAWS)
        .map(|s| {
            let g = random_feature_gram(Activation::Relu, &data.x, 256, &mut derive_rng(5, s));
            eig_sym(&center_matrix(&g)).unwrap().eigenvalues.as_slice().to_vec()
        })
        .collect();
    (eig_sym(&phi_c).unwrap().eigenvalues.as_slice().to_vec(), spectra)
}

fn mean_histogram(spectra: &[Vec<f64>], bins: usize, range: (f64, f64)) -> Histogram {
    let mut hist = esd_histogram(&spectra[0], bins, Some(range)).unwrap();
    for s in &spectra[1..] {
        let h = esd_histogram(s, bins, Some(range)).unwrap();
        hist.density.iter_mut().zip(&h.density).for_each(|(a, b)| *a += b);
    }
    hist.density.iter_mut().for_each(|a| *a /= spectra.len() as f64);
    hist
}

#[test]
fn limiting_density_matches_random_feature_spectrum() {
    let (phi_eigs, spectra) = setting();
    let model = ResolventModel::from_eigenvalues(&phi_eigs, 256).unwrap();
    let top = spectra.iter().map(|s| s[s.len() - 1]).fold(0.0, f64::max) * 1.05;
    let bins = 50;
    let hist = mean_histogram(&spectra, bins, (0.0, top));
    // Average the density over each bin on a fine grid.
    let per_bin = 40;
    let step = top / (bins * per_bin) as f64;
    let xs: Vec<f64> = (0..bins * per_bin).map(|i| (i as f64 + 0.5) * step).collect();
    let rho = model.density(&xs, 1e-3, &StieltjesOptions::default(), true).unwrap();
    let l1: f64 = (0..bins)
        .map(|b| {
            let mean = rho[b * per_bin..(b + 1) * per_bin].iter().sum::<f64>() / per_bin as f64;
            (mean - hist.density[b]).abs() * hist.width(b)
        })
        .sum();
    assert!(l1 <= 0.1, "L1 distance {l1}");
}

#[test]
fn bulk_support_matches_occupied_range() {
    let (phi_eigs, spectra) = setting();
    let model = ResolventModel::from_eigenvalues(&phi_eigs, 256).unwrap();
    let g = &spectra[0];
    let positive: Vec<f64> = g.iter().copied().filter(|&v| v > 1e-8).collect();
    let (lo, hi) = (positive[0], positive[positive.len() - 1]);
    let xs: Vec<f64> = (1..4000).map(|i| i as f64 * 1.5 * hi / 4000.0).collect();
    let rho = model.density(&xs, 1e-3, &StieltjesOptions::default(), true).unwrap();
    let support: Vec<f64> = xs.iter().zip(&rho).filter(|(_, &r)| r > 1e-3).map(|(x, _)| *x).collect();
    let (s_lo, s_hi) = (support[0], support[support.len() - 1]);
    assert!((s_lo - lo).abs() <= 0.05 * hi, "lower edge {s_lo} vs {lo}");
    assert!((s_hi - hi).abs() <= 0.05 * hi, "upper edge {s_hi} vs {hi}");
}
