use rfspectrum::cluster::{accuracy, kmeans, spectral_embed, KMeansOptions};
use rfspectrum::gmm::{presets, sample_mixture};
use rfspectrum::kernels::{center_matrix, phi_matrix, Activation};

fn four_class_accuracy(kind: Activation) -> f64 {
    let data = sample_mixture(&presets::fig5(512), 256, 0).unwrap();
    let phi_c = center_matrix(&phi_matrix(kind, &data.x).unwrap().values);
    let embedding = spectral_embed(&phi_c, 2).unwrap();
    let result = kmeans(&embedding, 4, &KMeansOptions::default(), 1).unwrap();
    accuracy(&result.labels, &data.labels, 4).unwrap()
}

#[test]
fn relu_separates_four_classes_in_two_eigenvectors() {
    let acc = four_class_accuracy(Activation::LeakyRelu { pos: 1.0, neg: 0.0 });
    assert!(acc >= 0.9, "accuracy {acc}");
}

#[test]
fn pure_mean_or_covariance_maps_see_only_two_groups() {
    for kind in [Activation::LeakyRelu { pos: 1.0, neg: 1.0 }, Activation::LeakyRelu { pos: 1.0, neg: -1.0 }] {
        let acc = four_class_accuracy(kind);
        assert!(acc <= 0.75, "{kind}: accuracy {acc}");
    }
}
