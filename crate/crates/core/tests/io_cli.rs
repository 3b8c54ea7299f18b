use std::path::Path;
use std::process::{Command, Output};

use rfspectrum::io::csv::{read_matrix, read_table};
use rfspectrum::io::{load_eeg, load_mnist};

const MIXTURE: &str = r#"{
    "p": 32, "K": 2,
    "means": ["canonical_spike(1, 3)", "canonical_spike(1, -3)"],
    "covariances": ["identity", "identity"],
    "proportions": [0.5, 0.5],
    "seed": 3
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfspectrum"))
        .args(args)
        .env_remove("RFSPECTRUM_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn mixture_file(dir: &Path) -> String {
    let path = dir.join("mixture.json");
    std::fs::write(&path, MIXTURE).unwrap();
    path.display().to_string()
}

#[test]
fn equiv_prints_coefficients_for_each_activation() {
    let out = run(&["equiv", "--activations", "linear,relu,abs", "--tau", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "activation,d0,d1,d2,taxonomy");
    assert_eq!(rows.len(), 4);
    // σ(t) = t: d0 = 0, d1 = 1, d2 = 0.
    let linear: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(linear[0], "linear");
    assert!(linear[1].parse::<f64>().unwrap().abs() < 1e-12);
    assert!((linear[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!(rows[3].starts_with("abs,"));
}

#[test]
fn gen_kernel_and_spectrum_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mixture_file(dir.path());
    let gen_dir = dir.path().join("gen");
    let out = run(&["gen", "--config", &cfg, "-T", "40", "--out", gen_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let x = read_matrix(&gen_dir.join("x.csv")).unwrap();
    assert_eq!((x.nrows(), x.ncols()), (32, 40));
    let labels = read_matrix(&gen_dir.join("labels.csv")).unwrap();
    assert_eq!(labels.len(), 40);
    assert!(labels.iter().all(|&l| l == 1.0 || l == 2.0));

    let kernel = dir.path().join("phi.csv");
    let out = run(&[
        "kernel", "--input", gen_dir.join("x.csv").to_str().unwrap(), "--activation", "relu", "--center",
        "--out", kernel.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let phi = read_matrix(&kernel).unwrap();
    assert_eq!((phi.nrows(), phi.ncols()), (40, 40));
    let row_sum: f64 = phi.row(0).iter().sum();
    assert!(row_sum.abs() < 1e-10);

    let spec_dir = dir.path().join("spec");
    let out = run(&["spectrum", "--config", &cfg, "-T", "40", "--out", spec_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["eigenvalues.csv", "histogram.csv", "density.csv", "spectrum.svg"] {
        assert!(spec_dir.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn cluster_writes_accuracy_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mixture_file(dir.path());
    let out_path = dir.path().join("acc.csv");
    let out = run(&[
        "cluster", "--data", &cfg, "--activations", "relu,erf", "-T", "32", "--runs", "3", "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_table(&out_path).unwrap();
    assert_eq!(header, ["activation", "taxonomy", "T", "mean_accuracy", "std_accuracy"]);
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let acc: f64 = row[3].parse().unwrap();
        assert!((0.5..=1.0).contains(&acc), "accuracy {acc}");
    }
}

#[test]
fn exit_codes_follow_error_categories() {
    let out = run(&["equiv", "--activations", "softplus"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["kernel", "--input", "/nonexistent/x.csv", "--out", "/tmp/unused.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["experiment", "--id", "fig9"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fig1") && err.contains("table5"), "{err}");

    // No data directory configured is a usage error; an empty one is a data error.
    let out = run(&["cluster", "--data", "mnist", "--out", "/tmp/unused.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let empty = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rfspectrum"))
        .args(["cluster", "--data", "mnist", "--out", "/tmp/unused.csv"])
        .env("RFSPECTRUM_DATA_DIR", empty.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

fn idx_images(images: &[Vec<u8>], side: u32) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x803u32, images.len() as u32, side, side] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    images.iter().for_each(|i| b.extend_from_slice(i));
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x801u32, labels.len() as u32] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(labels);
    b
}

#[test]
fn mnist_loader_keeps_digits_and_scales_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let mnist = dir.path().join("mnist");
    std::fs::create_dir(&mnist).unwrap();
    let side = 28u32;
    let images: Vec<Vec<u8>> = (0..6u32)
        .map(|k| (0..side * side).map(|i| ((i * 7 + k * 13) % 256) as u8).collect())
        .collect();
    let labels = [6u8, 8, 3, 6, 8, 1];
    std::fs::write(mnist.join("train-images-idx3-ubyte"), idx_images(&images[..4], side)).unwrap();
    std::fs::write(mnist.join("train-labels-idx1-ubyte"), idx_labels(&labels[..4])).unwrap();
    std::fs::write(mnist.join("t10k-images-idx3-ubyte"), idx_images(&images[4..], side)).unwrap();
    std::fs::write(mnist.join("t10k-labels-idx1-ubyte"), idx_labels(&labels[4..])).unwrap();

    let data = load_mnist(dir.path(), &[6, 8]).unwrap();
    assert_eq!(data.dim(), 784);
    assert_eq!(data.labels, vec![0, 1, 0, 1]);
    let m = data.mean_squared_norm();
    assert!((0.01..=100.0).contains(&m), "mean squared norm {m}");
    // Pixel k of image 0 equals (k·7 mod 256)/255/√784.
    assert!((data.vectors[(1, 0)] - 7.0 / 255.0 / 28.0).abs() < 1e-15);
}

#[test]
fn eeg_loader_windows_and_scales_recordings() {
    let dir = tempfile::tempdir().unwrap();
    for (set, offset) in [("B", 0i64), ("E", 50)] {
        let d = dir.path().join("eeg").join(set);
        std::fs::create_dir_all(&d).unwrap();
        for f in 0..2 {
            let text: String = (0..250i64).map(|i| format!("{}\n", (i * 37 + f * 11) % 400 - 200 + offset)).collect();
            std::fs::write(d.join(format!("{set}{f:03}.txt")), text).unwrap();
        }
    }
    let data = load_eeg(dir.path(), 100).unwrap();
    // Two files per set, two complete windows per file.
    assert_eq!(data.len(), 8);
    assert_eq!(data.dim(), 100);
    assert_eq!(data.labels, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    let m = data.mean_squared_norm();
    assert!((0.01..=100.0).contains(&m), "mean squared norm {m}");
}
