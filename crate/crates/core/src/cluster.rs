//! Random-feature spectral clustering: embed with the leading eigenvectors of
//! a centered Gram matrix, run k-means, score against ground truth.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand::RngCore;
use rayon::prelude::*;

use crate::equivalent::{taxonomy_of, Taxonomy};
use crate::error::{Error, Result};
use crate::gmm::{apportion, sample_mixture, MixtureModel};
use crate::kernels::{center_matrix, phi_matrix, random_feature_gram, Activation};
use crate::rng::{derive_rng, stream_id, Rng};
use crate::spectrum::eig_sym;

/// Eigenvectors of the `k` largest eigenvalues as the columns of a `T × k`
/// matrix, in decreasing eigenvalue order.
pub fn spectral_embed(gram_centered: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let t = gram_centered.nrows();
    if k > t {
        return Err(Error::InvalidArgument(format!(
            "cannot embed in {k} dimensions with {t} points"
        )));
    }
    let spec = eig_sym(gram_centered)?;
    let mut out = DMatrix::zeros(t, k);
    for r in 0..k {
        out.set_column(r, &spec.top_vector(r));
    }
    Ok(out)
}

/// Scales every nonzero row to unit length.
pub fn normalize_rows(points: &mut DMatrix<f64>) {
    for mut row in points.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `k × d`, one centroid per row.
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    /// Objective after every assignment step of the winning restart.
    pub objective_trace: Vec<f64>,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|d| (points[(i, d)] - centroids[(c, d)]).powi(2))
        .sum()
}

/// k-means++ seeding: first centroid uniform, then proportional to the
/// squared distance to the nearest chosen centroid.
fn seed_centroids(points: &DMatrix<f64>, k: usize, rng: &mut Rng) -> DMatrix<f64> {
    let (t, d) = points.shape();
    let mut centroids = DMatrix::zeros(k, d);
    let first = rng.random_range(0..t);
    centroids.set_row(0, &points.row(first));
    let mut nearest: Vec<f64> = (0..t).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = t - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..t)
        };
        centroids.set_row(c, &points.row(pick));
        for (i, v) in nearest.iter_mut().enumerate() {
            *v = v.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

fn assign(points: &DMatrix<f64>, centroids: &DMatrix<f64>, labels: &mut [usize]) -> f64 {
    let mut objective = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.nrows() {
            let d = sq_dist(points, i, centroids, c);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *label = best;
        objective += best_d;
    }
    objective
}

fn objective(points: &DMatrix<f64>, centroids: &DMatrix<f64>, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points, i, centroids, c))
        .sum()
}

fn lloyd(points: &DMatrix<f64>, k: usize, max_iter: usize, rng: &mut Rng) -> KMeansResult {
    let (t, d) = points.shape();
    let mut centroids = seed_centroids(points, k, rng);
    let mut labels = vec![usize::MAX; t];
    let mut trace = Vec::new();
    let mut current = assign(points, &centroids, &mut labels);
    trace.push(current);
    for _ in 0..max_iter {
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for j in 0..d {
                sums[(c, j)] += points[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        // an empty cluster moves onto the point farthest from its centroid
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..t)
                    .max_by(|&a, &b| {
                        sq_dist(points, a, &centroids, labels[a])
                            .total_cmp(&sq_dist(points, b, &centroids, labels[b]))
                    })
                    .unwrap_or(0);
                centroids.set_row(c, &points.row(far));
            }
        }
        let before = labels.clone();
        let updated = objective(points, &centroids, &labels);
        let next = assign(points, &centroids, &mut labels);
        debug_assert!(updated <= current * (1.0 + 1e-12) + 1e-12);
        debug_assert!(next <= updated * (1.0 + 1e-12) + 1e-12);
        trace.push(next);
        current = next;
        if labels == before {
            break;
        }
    }
    KMeansResult {
        inertia: current,
        labels,
        centroids,
        objective_trace: trace,
    }
}

/// Best of `restarts` Lloyd runs (restart `r` seeded from stream `r` of
/// `seed`); rows of `points` are the observations.
pub fn kmeans(points: &DMatrix<f64>, k: usize, opts: &KMeansOptions, seed: u64) -> Result<KMeansResult> {
    let t = points.nrows();
    if k == 0 || k > t {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {t} points")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = derive_rng(seed, r as u64);
        let run = lloyd(points, k, opts.max_iter, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// column assigned to each row.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    // potentials formulation, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    // Heap's algorithm
    let mut perm: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    visit(&perm);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Fraction of agreeing labels under the best relabeling of `predicted`.
pub fn accuracy(predicted: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("no labels to score".into()));
    }
    if let Some(bad) = predicted.iter().chain(truth).find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for K = {k}")));
    }
    let mut confusion = DMatrix::<f64>::zeros(k, k);
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[(p, t)] += 1.0;
    }
    let matched = if k <= 6 {
        let mut best = 0.0f64;
        for_each_permutation(k, |perm| {
            let s: f64 = perm.iter().enumerate().map(|(p, &t)| confusion[(p, t)]).sum();
            best = best.max(s);
        });
        best
    } else {
        let assignment = hungarian(&(-&confusion));
        assignment.iter().enumerate().map(|(p, &t)| confusion[(p, t)]).sum()
    };
    Ok(matched / predicted.len() as f64)
}

/// Where the observations of each run come from.
#[derive(Debug, Clone, Copy)]
pub enum DataSource<'a> {
    /// Fresh draws from a mixture.
    Synthetic(&'a MixtureModel),
    /// Class-balanced subsamples (without replacement) of a labeled pool;
    /// columns are observations, labels 0-based.
    Labeled {
        vectors: &'a DMatrix<f64>,
        labels: &'a [usize],
    },
}

impl DataSource<'_> {
    pub fn num_classes(&self) -> usize {
        match self {
            DataSource::Synthetic(model) => model.num_classes(),
            DataSource::Labeled { labels, .. } => labels.iter().max().map_or(0, |m| m + 1),
        }
    }

    fn draw(&self, t: usize, rng: &mut Rng) -> Result<(DMatrix<f64>, Vec<usize>)> {
        match self {
            DataSource::Synthetic(model) => {
                let data = sample_mixture(model, t, rng.next_u64())?;
                Ok((data.x, data.labels))
            }
            DataSource::Labeled { vectors, labels } => {
                let k = self.num_classes();
                let sizes = apportion(&vec![1.0 / k as f64; k], t)?;
                let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
                for (i, &a) in labels.iter().enumerate() {
                    members[a].push(i);
                }
                let mut chosen = Vec::with_capacity(t);
                let mut out_labels = Vec::with_capacity(t);
                for (a, (pool, &size)) in members.iter().zip(&sizes).enumerate() {
                    if pool.len() < size {
                        return Err(Error::InvalidArgument(format!(
                            "class {} has {} observations, {size} requested",
                            a + 1,
                            pool.len()
                        )));
                    }
                    let mut picked: Vec<usize> = rand::seq::index::sample(rng, pool.len(), size)
                        .into_iter()
                        .map(|i| pool[i])
                        .collect();
                    picked.sort_unstable();
                    chosen.extend(picked);
                    out_labels.extend(std::iter::repeat_n(a, size));
                }
                Ok((vectors.select_columns(&chosen), out_labels))
            }
        }
    }
}

/// How the kernel matrix of a run is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GramSource {
    /// One draw of `n` random features.
    MonteCarlo { n: usize },
    /// The closed-form expectation `Φ`.
    Expected,
}

#[derive(Debug, Clone)]
pub struct ClusteringConfig {
    pub activations: Vec<Activation>,
    pub sizes: Vec<usize>,
    pub gram: GramSource,
    pub runs: usize,
    pub seed: u64,
    pub embed_dim: usize,
    pub row_normalize: bool,
    pub kmeans: KMeansOptions,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            activations: vec![Activation::Relu],
            sizes: vec![32, 64, 128],
            gram: GramSource::MonteCarlo { n: 32 },
            runs: 50,
            seed: 0,
            embed_dim: 2,
            row_normalize: false,
            kmeans: KMeansOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AccuracyRow {
    pub activation: Activation,
    pub taxonomy: Taxonomy,
    pub t: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub per_run: Vec<f64>,
}

/// One clustering pass on given data.
pub fn cluster_once(
    kind: Activation,
    x: &DMatrix<f64>,
    truth: &[usize],
    k: usize,
    config: &ClusteringConfig,
    w_rng: &mut Rng,
    kmeans_seed: u64,
) -> Result<f64> {
    let gram = match config.gram {
        GramSource::MonteCarlo { n } => random_feature_gram(kind, x, n, w_rng),
        GramSource::Expected => phi_matrix(kind, x)?.values,
    };
    let mut embedding = spectral_embed(&center_matrix(&gram), config.embed_dim)?;
    if config.row_normalize {
        normalize_rows(&mut embedding);
    }
    let result = kmeans(&embedding, k, &config.kmeans, kmeans_seed)?;
    accuracy(&result.labels, truth, k)
}

/// Mean and standard deviation of accuracy for every `(activation, T)`.
///
/// Run `r` at size index `s` draws its data, its `W` and its k-means seeds
/// from dedicated streams of `config.seed`, shared by all activations, so
/// activations are compared on identical samples and projections.
pub fn clustering_experiment(source: DataSource<'_>, config: &ClusteringConfig) -> Result<Vec<AccuracyRow>> {
    if config.runs == 0 {
        return Err(Error::InvalidArgument("runs must be positive".into()));
    }
    if let GramSource::MonteCarlo { n: 0 } = config.gram {
        return Err(Error::InvalidArgument("feature count n must be positive".into()));
    }
    let k = source.num_classes();
    let mut rows = Vec::new();
    for &kind in &config.activations {
        for (s, &t) in config.sizes.iter().enumerate() {
            let per_run = (0..config.runs)
                .into_par_iter()
                .map(|r| {
                    let mut data_rng = derive_rng(config.seed, stream_id(1, r as u32, s as u16));
                    let mut w_rng = derive_rng(config.seed, stream_id(2, r as u32, s as u16));
                    let kmeans_seed = derive_rng(config.seed, stream_id(3, r as u32, s as u16)).next_u64();
                    let (x, truth) = source.draw(t, &mut data_rng)?;
                    cluster_once(kind, &x, &truth, k, config, &mut w_rng, kmeans_seed)
                })
                .collect::<Vec<Result<f64>>>()
                .into_iter()
                .enumerate()
                .map(|(r, res)| res.map_err(|e| e.context(format!("{kind}, T = {t}, run {r}"))))
                .collect::<Result<Vec<f64>>>()?;
            let mean = per_run.iter().sum::<f64>() / per_run.len() as f64;
            let std = if per_run.len() > 1 {
                (per_run.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (per_run.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(AccuracyRow {
                activation: kind,
                taxonomy: taxonomy_of(kind),
                t,
                mean_accuracy: mean,
                std_accuracy: std,
                per_run,
            });
        }
    }
    Ok(rows)
}
