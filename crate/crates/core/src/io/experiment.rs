//! Orchestration of the figure and table experiments.
//!
//! Every artifact starts with a comment line carrying the experiment id,
//! the seed and the SHA-256 of the configuration. When an experiment fails,
//! the files it already wrote are removed.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::config::{DataConfig, ExperimentConfig, MixtureConfig, TauSource, EXPERIMENT_IDS};
use super::csv::{format_f64, write_matrix, write_table};
use super::svg::{Chart, PALETTE};
use super::{data_dir_from_env, load_eeg, load_mnist, RawDataset};
use crate::cluster::{
    accuracy, clustering_experiment, kmeans, spectral_embed, ClusteringConfig, DataSource, GramSource,
    KMeansOptions,
};
use crate::equivalent::{build_equivalent, coefficients, taxonomy_of, EquivalentCoefficients};
use crate::error::{Error, Result, ResultExt};
use crate::gmm::{
    class_statistics, estimate_tau, fit_empirical_model, presets, sample_mixture, statistic_norms,
    ClassStatistics, DataSet, MixtureModel,
};
use crate::kernels::{center_matrix, monte_carlo_gram, phi_matrix, Activation};
use crate::rng::{derive_rng, stream_id};
use crate::spectrum::{
    class_separation, eig_sym, eigenvector_alignment, esd_histogram, operator_norm, operator_norm_diff,
    SpectrumResult,
};

pub const DEFAULT_P: usize = 512;
pub const DEFAULT_T: usize = 256;
pub const DEFAULT_BINS: usize = 50;
pub const EEG_WINDOW: usize = 100;

/// Activations of the clustering tables, grouped by taxonomy.
pub fn table_activations() -> Vec<Activation> {
    use Activation::*;
    vec![Linear, Indicator, Sign, Sin, Erf, Abs, Cos, GaussExp, Relu]
}

/// Collects artifacts and deletes them unless the run is committed.
struct ArtifactWriter {
    dir: PathBuf,
    header: String,
    written: Vec<PathBuf>,
    committed: bool,
}

impl ArtifactWriter {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.output_dir)
            .map_err(|e| Error::from(e).context(config.output_dir.display().to_string()))?;
        Ok(ArtifactWriter {
            dir: config.output_dir.clone(),
            header: format!(
                "rfspectrum experiment={} seed={} config_sha256={}",
                config.experiment,
                config.seed,
                config.hash()
            ),
            written: Vec::new(),
            committed: false,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        path
    }

    fn matrix(&mut self, name: &str, note: &str, m: &DMatrix<f64>) -> Result<()> {
        let path = self.path(name);
        write_matrix(&path, &[self.header.clone(), note.to_string()], m)
    }

    fn table(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        write_table(&path, std::slice::from_ref(&self.header), columns, rows)
    }

    fn chart(&mut self, name: &str, chart: &Chart) -> Result<()> {
        let path = self.path(name);
        let body = format!("<!-- {} -->\n{}", self.header, chart.render());
        std::fs::write(&path, body).map_err(|e| Error::from(e).context(path.display().to_string()))
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

/// Runs one experiment and returns the paths of the files it wrote.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let mut out = ArtifactWriter::new(config)?;
    let id = config.experiment.as_str();
    let result = match id {
        "fig1" => spectrum_figure(config, &mut out),
        "fig2" | "fig3" | "fig4" | "fig5" | "fig6" | "custom" => eigenvector_figure(config, &mut out),
        "table3" => statistics_table(config, &mut out),
        "table4" | "table5" => accuracy_table(config, &mut out),
        other => Err(Error::Config(format!(
            "unknown experiment {other:?}; valid ids: {}",
            EXPERIMENT_IDS.join(", ")
        ))),
    };
    result.context(|| format!("experiment {id}"))?;
    out.committed = true;
    Ok(std::mem::take(&mut out.written))
}

fn file_tag(kind: Activation) -> String {
    kind.to_string().replace([':', '.'], "_")
}

/// Φ_c and Φ̃_c on one sample of a mixture.
struct KernelPair {
    kind: Activation,
    coeffs: EquivalentCoefficients,
    phi_c: DMatrix<f64>,
    tilde_c: DMatrix<f64>,
    spec: SpectrumResult,
    spec_tilde: SpectrumResult,
}

impl KernelPair {
    fn compute(
        kind: Activation,
        data: &DataSet,
        stats: &ClassStatistics,
        config: &ExperimentConfig,
        index: usize,
    ) -> Result<Self> {
        let tau = match config.tau_source {
            TauSource::Model => stats.tau,
            TauSource::Estimate => estimate_tau(&data.x)?,
        };
        let coeffs = coefficients(kind, tau)?;
        let phi = match config.realizations {
            Some(r) => {
                let n = config.n.unwrap_or(data.dim());
                let seed = derive_rng(config.seed, stream_id(4, index as u32, 0)).next_u64();
                monte_carlo_gram(kind, &data.x, n, r, seed, false)?.mean
            }
            None => phi_matrix(kind, &data.x)?.values,
        };
        let phi_c = center_matrix(&phi);
        let tilde_c = center_matrix(&build_equivalent(data, stats, &coeffs)?.values);
        let spec = eig_sym(&phi_c)?;
        let spec_tilde = eig_sym(&tilde_c)?;
        Ok(KernelPair {
            kind,
            coeffs,
            phi_c,
            tilde_c,
            spec,
            spec_tilde,
        })
    }

    /// Leading eigenvector of Φ̃_c, signed to agree with that of Φ_c.
    fn top_vectors(&self, rank: usize) -> (DVector<f64>, DVector<f64>) {
        let u = self.spec.top_vector(rank);
        let mut v = self.spec_tilde.top_vector(rank);
        if u.dot(&v) < 0.0 {
            v.neg_mut();
        }
        (u, v)
    }

    fn summary_row(&self, labels: &[usize]) -> Result<Vec<String>> {
        let (u, v) = self.top_vectors(0);
        let rel = operator_norm_diff(&self.phi_c, &self.tilde_c)? / operator_norm(&self.phi_c)?.max(f64::MIN_POSITIVE);
        let sep = class_separation(u.as_slice(), labels, 0, 1)?;
        Ok(vec![
            self.kind.to_string(),
            taxonomy_of(self.kind).to_string(),
            format_f64(self.coeffs.tau),
            format_f64(self.coeffs.d0),
            format_f64(self.coeffs.d1),
            format_f64(self.coeffs.d2),
            format_f64(self.spec.largest()),
            format_f64(self.spec_tilde.largest()),
            format_f64(rel),
            format_f64(eigenvector_alignment(&u, &v)?),
            format_f64(sep),
        ])
    }
}

const SUMMARY_COLUMNS: [&str; 11] = [
    "activation",
    "taxonomy",
    "tau",
    "d0",
    "d1",
    "d2",
    "lambda_max_phi_c",
    "lambda_max_phi_tilde_c",
    "relative_operator_distance",
    "top_eigenvector_alignment",
    "class_separation_t",
];

fn mixture_for(config: &ExperimentConfig) -> Result<(MixtureModel, Option<u64>)> {
    let p = config.p.unwrap_or(DEFAULT_P);
    match &config.data {
        Some(DataConfig::Mixture(m)) => Ok((m.build()?, m.seed)),
        Some(DataConfig::MixtureFile(path)) => {
            let m = MixtureConfig::load(path)?;
            Ok((m.build()?, m.seed))
        }
        Some(_) => Err(Error::Config(format!(
            "experiment {} needs a mixture data source",
            config.experiment
        ))),
        None => Ok((
            match config.experiment.as_str() {
                "fig1" | "fig2" => presets::fig1(p),
                "fig3" => presets::fig3(p),
                "fig4" => presets::fig4(p),
                "fig5" | "fig6" => presets::fig5(p),
                other => return Err(Error::Config(format!("experiment {other} has no default mixture"))),
            },
            None,
        )),
    }
}

fn default_activations(id: &str) -> Vec<Activation> {
    match id {
        "fig3" => vec![Activation::Erf, Activation::Relu],
        "fig4" => vec![Activation::Abs, Activation::Relu],
        // (1, 1) is |t| and (1, −1) is t under ς₊max(t, 0) + ς₋max(−t, 0).
        "fig5" => vec![
            Activation::LeakyRelu { pos: 1.0, neg: 1.0 },
            Activation::LeakyRelu { pos: 1.0, neg: -1.0 },
        ],
        "fig6" => vec![Activation::LeakyRelu { pos: 1.0, neg: 0.0 }],
        _ => vec![Activation::Relu],
    }
}

fn sample_for(config: &ExperimentConfig) -> Result<(MixtureModel, DataSet, ClassStatistics)> {
    let (model, mixture_seed) = mixture_for(config)?;
    let t = config.t.unwrap_or(DEFAULT_T);
    let seed = mixture_seed.unwrap_or(config.seed);
    let data = sample_mixture(&model, t, seed)?;
    let stats = class_statistics(&model, &data.class_sizes)?;
    Ok((model, data, stats))
}

fn one_based(labels: &[usize]) -> Vec<f64> {
    labels.iter().map(|&l| (l + 1) as f64).collect()
}

fn spectrum_figure(config: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<()> {
    let (_, data, stats) = sample_for(config)?;
    let bins = config.bins.unwrap_or(DEFAULT_BINS);
    let mut summary = Vec::new();
    for (index, kind) in config.activation_list(&default_activations("fig1"))?.into_iter().enumerate() {
        let pair = KernelPair::compute(kind, &data, &stats, config, index)?;
        let tag = file_tag(kind);
        let eigs = DMatrix::from_fn(pair.spec.len(), 2, |r, c| {
            if c == 0 {
                pair.spec.eigenvalues[r]
            } else {
                pair.spec_tilde.eigenvalues[r]
            }
        });
        out.matrix(&format!("eigenvalues_{tag}.csv"), "columns: phi_c, phi_tilde_c (ascending)", &eigs)?;

        let lo = pair.spec.eigenvalues[0].min(pair.spec_tilde.eigenvalues[0]).min(0.0);
        let hi = pair.spec.largest().max(pair.spec_tilde.largest()) * 1.05;
        let range = Some((lo, if hi > lo { hi } else { lo + 1.0 }));
        let h = esd_histogram(pair.spec.eigenvalues.as_slice(), bins, range)?;
        let ht = esd_histogram(pair.spec_tilde.eigenvalues.as_slice(), bins, range)?;
        for (name, hist) in [("phi_c", &h), ("phi_tilde_c", &ht)] {
            let table = DMatrix::from_fn(hist.bins(), 3, |r, c| match c {
                0 => hist.edges[r],
                1 => hist.edges[r + 1],
                _ => hist.density[r],
            });
            out.matrix(&format!("histogram_{name}_{tag}.csv"), "columns: bin_left, bin_right, density", &table)?;
        }
        let chart = Chart::new(&format!("Eigenvalues of centered kernels, {kind}"), "eigenvalue", "density")
            .bars(&h.edges, &h.density, PALETTE[0], "Phi_c")
            .bars(&ht.edges, &ht.density, PALETTE[1], "Phi~_c");
        out.chart(&format!("histogram_{tag}.svg"), &chart)?;
        summary.push(pair.summary_row(&data.labels)?);
    }
    out.table("summary.csv", &SUMMARY_COLUMNS, &summary)
}

fn eigenvector_figure(config: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<()> {
    let id = config.experiment.as_str();
    let (model, data, stats) = sample_for(config)?;
    let k = model.num_classes();
    let vectors = if k > 2 { 2 } else { 1 };
    let mut summary = Vec::new();
    for (index, kind) in config.activation_list(&default_activations(id))?.into_iter().enumerate() {
        let pair = KernelPair::compute(kind, &data, &stats, config, index)?;
        let tag = file_tag(kind);
        let t = data.len();
        let mut table = DMatrix::zeros(t, 2 + 2 * vectors);
        table.set_column(0, &DVector::from_fn(t, |i, _| (i + 1) as f64));
        table.set_column(1, &DVector::from_vec(one_based(&data.labels)));
        let idx: Vec<f64> = (1..=t).map(|i| i as f64).collect();
        let mut chart = Chart::new(&format!("Leading eigenvectors, {kind}"), "index", "entry");
        for rank in 0..vectors {
            let (u, v) = pair.top_vectors(rank);
            table.set_column(2 + 2 * rank, &u);
            table.set_column(3 + 2 * rank, &v);
            chart = chart
                .line(&idx, u.as_slice(), PALETTE[2 * rank], &format!("Phi_c #{}", rank + 1))
                .line(&idx, v.as_slice(), PALETTE[2 * rank + 1], &format!("Phi~_c #{}", rank + 1));
        }
        let note = if vectors == 1 {
            "columns: index, class, phi_c_1, phi_tilde_c_1"
        } else {
            "columns: index, class, phi_c_1, phi_tilde_c_1, phi_c_2, phi_tilde_c_2"
        };
        out.matrix(&format!("eigenvectors_{tag}.csv"), note, &table)?;
        out.chart(&format!("eigenvectors_{tag}.svg"), &chart)?;

        if vectors == 2 {
            let embedding = spectral_embed(&pair.phi_c, 2)?;
            let mut scatter = Chart::new(&format!("Two leading eigenvectors, {kind}"), "u1", "u2");
            for a in 0..k {
                let members: Vec<usize> = (0..t).filter(|&i| data.labels[i] == a).collect();
                let xs: Vec<f64> = members.iter().map(|&i| embedding[(i, 0)]).collect();
                let ys: Vec<f64> = members.iter().map(|&i| embedding[(i, 1)]).collect();
                scatter = scatter.points(&xs, &ys, PALETTE[a % PALETTE.len()], &format!("class {}", a + 1));
            }
            out.chart(&format!("embedding_{tag}.svg"), &scatter)?;
            let seed = derive_rng(config.seed, stream_id(3, index as u32, 0)).next_u64();
            let result = kmeans(&embedding, k, &KMeansOptions::default(), seed)?;
            let acc = accuracy(&result.labels, &data.labels, k)?;
            let mut row = pair.summary_row(&data.labels)?;
            row.push(format_f64(acc));
            summary.push(row);
        } else {
            let mut row = pair.summary_row(&data.labels)?;
            row.push(String::new());
            summary.push(row);
        }
    }
    let mut columns = SUMMARY_COLUMNS.to_vec();
    columns.push("kmeans_accuracy");
    out.table("summary.csv", &columns, &summary)
}

fn data_root(config: &ExperimentConfig, explicit: Option<&Path>) -> Result<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.data_dir.clone())
        .or_else(data_dir_from_env)
        .ok_or_else(|| {
            Error::Config("no dataset location: set data_dir, a data root, or RFSPECTRUM_DATA_DIR".into())
        })
}

fn load_mnist_for(config: &ExperimentConfig) -> Result<RawDataset> {
    match &config.data {
        Some(DataConfig::Mnist { root, digits }) => load_mnist(&data_root(config, root.as_deref())?, digits),
        _ => load_mnist(&data_root(config, None)?, &[6, 8]),
    }
}

fn load_eeg_for(config: &ExperimentConfig) -> Result<RawDataset> {
    match &config.data {
        Some(DataConfig::Eeg { root }) => load_eeg(&data_root(config, root.as_deref())?, EEG_WINDOW),
        _ => load_eeg(&data_root(config, None)?, EEG_WINDOW),
    }
}

/// `(‖MᵀM‖, ‖ttᵀ + 2S‖)` of the Gaussian model fitted to a labeled data set.
pub fn dataset_statistic_norms(raw: &RawDataset) -> Result<(f64, f64)> {
    let model = fit_empirical_model(&raw.vectors, &raw.labels)?;
    let mut sizes = vec![0usize; raw.num_classes()];
    raw.labels.iter().for_each(|&l| sizes[l] += 1);
    let stats = class_statistics(&model, &sizes)?;
    Ok(statistic_norms(&stats))
}

fn statistics_table(config: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<()> {
    let mnist = load_mnist_for(config).context(|| "MNIST".to_string())?;
    let eeg = load_eeg_for(config).context(|| "EEG".to_string())?;
    let mut rows = Vec::new();
    for (name, raw) in [("mnist", &mnist), ("eeg", &eeg)] {
        let (mean_norm, cov_norm) = dataset_statistic_norms(raw)?;
        rows.push(vec![name.to_string(), format_f64(mean_norm), format_f64(cov_norm)]);
    }
    out.table("statistics.csv", &["dataset", "mean_norm", "cov_norm"], &rows)
}

/// Clustering accuracy rows as written by the `cluster` subcommand.
pub fn accuracy_rows(rows: &[crate::cluster::AccuracyRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.activation.to_string(),
                r.taxonomy.to_string(),
                r.t.to_string(),
                format_f64(r.mean_accuracy),
                format_f64(r.std_accuracy),
            ]
        })
        .collect()
}

pub const ACCURACY_COLUMNS: [&str; 5] = ["activation", "taxonomy", "T", "mean_accuracy", "std_accuracy"];

fn accuracy_table(config: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<()> {
    let cluster_config = ClusteringConfig {
        activations: config.activation_list(&table_activations())?,
        sizes: config.t_list.clone().unwrap_or_else(|| vec![32, 64, 128]),
        gram: GramSource::MonteCarlo { n: config.n.unwrap_or(32) },
        runs: config.runs.unwrap_or(50),
        seed: config.seed,
        ..ClusteringConfig::default()
    };
    let rows = match &config.data {
        Some(DataConfig::Mixture(_)) | Some(DataConfig::MixtureFile(_)) => {
            let (model, _) = mixture_for(config)?;
            clustering_experiment(DataSource::Synthetic(&model), &cluster_config)?
        }
        _ => {
            let raw = if config.experiment == "table4" {
                load_mnist_for(config)?
            } else {
                load_eeg_for(config)?
            };
            clustering_experiment(
                DataSource::Labeled {
                    vectors: &raw.vectors,
                    labels: &raw.labels,
                },
                &cluster_config,
            )?
        }
    };
    out.table("accuracy.csv", &ACCURACY_COLUMNS, &accuracy_rows(&rows))?;
    let mut chart = Chart::new("Clustering accuracy", "T", "mean accuracy");
    for (i, kind) in cluster_config.activations.iter().enumerate() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.activation == *kind)
            .map(|r| (r.t as f64, r.mean_accuracy))
            .unzip();
        chart = chart.line(&xs, &ys, PALETTE[i % PALETTE.len()], &kind.to_string());
    }
    out.chart("accuracy.svg", &chart)
}
