//! Gaussian mixture data under the `x_i = μ_a/√p + ω_i`, `ω_i ~ N(0, C_a/p)`
//! normalization, together with the class statistics `M`, `t`, `S`, `τ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, fill_standard_normal};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const PROPORTION_TOL: f64 = 1e-12;

/// Ground-truth mixture: `K` means (before the `1/√p` scaling), `K`
/// covariances and class proportions.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    p: usize,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    proportions: Vec<f64>,
    factors: Vec<DMatrix<f64>>,
}

impl MixtureModel {
    /// Validates and factorizes the model. Each covariance is factored as
    /// `C = F Fᵀ` through its symmetric eigendecomposition; eigenvalues in
    /// `[-1e-10‖C‖, 0)` are clipped to zero, anything below is rejected.
    pub fn new(
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
        proportions: Vec<f64>,
    ) -> Result<Self> {
        let k = means.len();
        if k == 0 {
            return Err(Error::Empty("mixture has no classes".into()));
        }
        if covariances.len() != k || proportions.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} means, {} covariances, {} proportions",
                k,
                covariances.len(),
                proportions.len()
            )));
        }
        let p = means[0].len();
        if p == 0 {
            return Err(Error::Empty("dimension p = 0".into()));
        }
        for (a, (mu, c)) in means.iter().zip(&covariances).enumerate() {
            if mu.len() != p || c.nrows() != p || c.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "class {}: mean of length {}, covariance {}x{}, expected p = {p}",
                    a + 1,
                    mu.len(),
                    c.nrows(),
                    c.ncols()
                )));
            }
            if mu.iter().chain(c.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("class {} parameters", a + 1)));
            }
            let scale = c.amax().max(f64::MIN_POSITIVE);
            let asym = (c - c.transpose()).amax();
            if asym > SYMMETRY_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "covariance of class {} is not symmetric (max asymmetry {asym:e})",
                    a + 1
                )));
            }
        }
        if proportions.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidArgument(
                "class proportions must be strictly positive".into(),
            ));
        }
        let total: f64 = proportions.iter().sum();
        if (total - 1.0).abs() > PROPORTION_TOL {
            return Err(Error::InvalidArgument(format!(
                "class proportions sum to {total}, expected 1"
            )));
        }
        let factors = covariances
            .iter()
            .enumerate()
            .map(|(a, c)| covariance_factor(a + 1, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureModel {
            p,
            means,
            covariances,
            proportions,
            factors,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    /// Class sizes for a sample of `t` points.
    pub fn class_sizes(&self, t: usize) -> Result<Vec<usize>> {
        apportion(&self.proportions, t)
    }
}

fn is_diagonal(c: &DMatrix<f64>) -> bool {
    let n = c.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || c[(i, j)] == 0.0))
}

/// `F` with `F Fᵀ = C`. `class` is 1-based and only used for diagnostics.
fn covariance_factor(class: usize, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = c.nrows();
    if is_diagonal(c) {
        let norm = c.diagonal().amax();
        let tol = PSD_TOL * norm;
        let mut f = DMatrix::zeros(p, p);
        for i in 0..p {
            let v = c[(i, i)];
            if v < -tol {
                return Err(Error::NotPositiveSemidefinite {
                    class,
                    min_eigenvalue: v,
                    tolerance: tol,
                });
            }
            f[(i, i)] = v.max(0.0).sqrt();
        }
        return Ok(f);
    }
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let norm = eig.eigenvalues.amax();
    let tol = PSD_TOL * norm;
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite {
            class,
            min_eigenvalue: min,
            tolerance: tol,
        });
    }
    let mut f = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    Ok(f)
}

/// Largest-remainder apportionment of `proportions · t`; every class receives
/// at least one point when `t ≥ K`.
pub fn apportion(proportions: &[f64], t: usize) -> Result<Vec<usize>> {
    let k = proportions.len();
    if t < k {
        return Err(Error::InvalidArgument(format!(
            "sample size T = {t} is smaller than the class count K = {k}"
        )));
    }
    let total: f64 = proportions.iter().sum();
    let quotas: Vec<f64> = proportions.iter().map(|c| c / total * t as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    // stable sort keeps lower class index first on ties
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &a in order.iter().take(t - assigned) {
        sizes[a] += 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..k).max_by_key(|&a| (sizes[a], std::cmp::Reverse(a))).unwrap();
        sizes[donor] -= 1;
        sizes[empty] += 1;
    }
    Ok(sizes)
}

/// A sampled data matrix with the pieces of its decomposition.
///
/// Observations are sorted by class: the first `T₁` columns belong to class 1,
/// and so on. Labels are 0-based class indices.
#[derive(Debug, Clone)]
pub struct DataSet {
    /// `p × T`, column `i` is `μ_{a(i)}/√p + ω_i`.
    pub x: DMatrix<f64>,
    pub labels: Vec<usize>,
    /// `p × T` noise parts `ω_i`.
    pub omega: DMatrix<f64>,
    /// `φ_i = ‖ω_i‖² − tr(C_{a(i)})/p`.
    pub phi: DVector<f64>,
    /// `T × K` class indicator matrix.
    pub j: DMatrix<f64>,
    pub class_sizes: Vec<usize>,
}

impl DataSet {
    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_sizes.len()
    }
}

pub fn indicator_matrix(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(labels.len(), k);
    for (i, &a) in labels.iter().enumerate() {
        j[(i, a)] = 1.0;
    }
    j
}

/// Draws `t` observations from `model`. Bitwise deterministic per seed: the
/// noise of class `a` comes from stream `a` of `seed`.
pub fn sample_mixture(model: &MixtureModel, t: usize, seed: u64) -> Result<DataSet> {
    let sizes = model.class_sizes(t)?;
    let p = model.p;
    let sqrt_p = (p as f64).sqrt();
    let mut x = DMatrix::zeros(p, t);
    let mut omega = DMatrix::zeros(p, t);
    let mut phi = DVector::zeros(t);
    let mut labels = Vec::with_capacity(t);
    let mut col = 0;
    for (a, &size) in sizes.iter().enumerate() {
        let mut rng = derive_rng(seed, a as u64);
        let mut z = DMatrix::zeros(p, size);
        fill_standard_normal(&mut rng, z.as_mut_slice());
        let w = (&model.factors[a] * z) / sqrt_p;
        let mean = &model.means[a] / sqrt_p;
        let expected_norm = model.covariances[a].trace() / p as f64;
        for (c, wc) in w.column_iter().enumerate() {
            omega.set_column(col + c, &wc);
            x.set_column(col + c, &(&mean + wc));
            phi[col + c] = wc.norm_squared() - expected_norm;
            labels.push(a);
        }
        col += size;
    }
    let j = indicator_matrix(&labels, model.num_classes());
    Ok(DataSet {
        x,
        labels,
        omega,
        phi,
        j,
        class_sizes: sizes,
    })
}

/// `M`, `t`, `S`, `τ` and `C°` of a mixture for given class sizes.
#[derive(Debug, Clone)]
pub struct ClassStatistics {
    /// `p × K` matrix of means.
    pub m: DMatrix<f64>,
    /// `t_a = tr(C_a − C°)/√p`.
    pub t: DVector<f64>,
    /// `S_ab = tr(C_a C_b)/p`.
    pub s: DMatrix<f64>,
    /// `τ = tr(C°)/p`.
    pub tau: f64,
    /// `C° = Σ_a (T_a/T) C_a`.
    pub cbar: DMatrix<f64>,
}

pub fn class_statistics(model: &MixtureModel, class_sizes: &[usize]) -> Result<ClassStatistics> {
    let k = model.num_classes();
    if class_sizes.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} class sizes for {k} classes",
            class_sizes.len()
        )));
    }
    if class_sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidArgument("class sizes must be positive".into()));
    }
    let p = model.p;
    let total: usize = class_sizes.iter().sum();
    let mut m = DMatrix::zeros(p, k);
    for (a, mu) in model.means.iter().enumerate() {
        m.set_column(a, mu);
    }
    let mut cbar = DMatrix::zeros(p, p);
    for (c, &size) in model.covariances.iter().zip(class_sizes) {
        cbar += c * (size as f64 / total as f64);
    }
    let cbar_trace = cbar.trace();
    let t = DVector::from_iterator(
        k,
        model
            .covariances
            .iter()
            .map(|c| (c.trace() - cbar_trace) / (p as f64).sqrt()),
    );
    let mut s = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            // tr(C_a C_b) = Σ_ij (C_a)_ij (C_b)_ji
            let v = model.covariances[a].dot(&model.covariances[b].transpose()) / p as f64;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    Ok(ClassStatistics {
        m,
        t,
        s,
        tau: cbar_trace / p as f64,
        cbar,
    })
}

/// Mean squared column norm `(1/T) Σ ‖x_i‖²`, a consistent estimate of `τ`.
pub fn estimate_tau(x: &DMatrix<f64>) -> Result<f64> {
    if x.ncols() == 0 {
        return Err(Error::Empty("cannot estimate tau from zero observations".into()));
    }
    Ok(x.norm_squared() / x.ncols() as f64)
}

/// Mixture whose means and covariances are the per-class sample moments of
/// `raw` (columns are observations), rescaled back to the model
/// normalization: `μ̂_a = √p · mean`, `Ĉ_a = p · cov` (denominator `T_a − 1`).
pub fn fit_empirical_model(raw: &DMatrix<f64>, labels: &[usize]) -> Result<MixtureModel> {
    if raw.ncols() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} observations but {} labels",
            raw.ncols(),
            labels.len()
        )));
    }
    let k = labels
        .iter()
        .max()
        .map(|&a| a + 1)
        .ok_or_else(|| Error::Empty("no observations".into()))?;
    let p = raw.nrows();
    let sqrt_p = (p as f64).sqrt();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in labels.iter().enumerate() {
        members[a].push(i);
    }
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    let mut proportions = Vec::with_capacity(k);
    for (a, idx) in members.iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {} has {} sample(s), at least 2 are required",
                a + 1,
                idx.len()
            )));
        }
        let block = raw.select_columns(idx);
        let mean = block.column_mean();
        let mut centered = block;
        for mut c in centered.column_iter_mut() {
            c -= &mean;
        }
        let mut cov = &centered * centered.transpose() * (p as f64 / (idx.len() - 1) as f64);
        cov = (&cov + cov.transpose()) * 0.5;
        means.push(mean * sqrt_p);
        covariances.push(cov);
        proportions.push(idx.len() as f64 / labels.len() as f64);
    }
    let total: f64 = proportions.iter().sum();
    for c in proportions.iter_mut() {
        *c /= total;
    }
    MixtureModel::new(means, covariances, proportions)
}

/// Operator norms `(‖MᵀM‖, ‖ttᵀ + 2S‖)` summarizing how much class
/// information lives in the means versus the covariances.
pub fn statistic_norms(stats: &ClassStatistics) -> (f64, f64) {
    let mtm = stats.m.transpose() * &stats.m;
    let cov = &stats.t * stats.t.transpose() + &stats.s * 2.0;
    (symmetric_norm(&mtm), symmetric_norm(&cov))
}

fn symmetric_norm(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new((a + a.transpose()) * 0.5)
        .eigenvalues
        .amax()
}

/// Mixtures used throughout the figures.
pub mod presets {
    use super::*;

    /// `e_index · value`, with a 1-based index.
    pub fn canonical_spike(p: usize, index: usize, value: f64) -> DVector<f64> {
        let mut v = DVector::zeros(p);
        v[index - 1] = value;
        v
    }

    /// `(base + delta/√p) I_p`.
    pub fn scaled_identity(p: usize, base: f64, delta_over_sqrt_p: f64) -> DMatrix<f64> {
        DMatrix::identity(p, p) * (base + delta_over_sqrt_p / (p as f64).sqrt())
    }

    fn two_class(p: usize, spike: f64, cov_delta: f64) -> MixtureModel {
        let means = (1..=2)
            .map(|a| canonical_spike(p, a, spike))
            .collect::<Vec<_>>();
        let covariances = (1..=2)
            .map(|a| scaled_identity(p, 1.0, cov_delta * (a - 1) as f64))
            .collect();
        let means = if spike == 0.0 {
            vec![DVector::zeros(p); 2]
        } else {
            means
        };
        MixtureModel::new(means, covariances, vec![0.5, 0.5]).expect("preset is valid")
    }

    /// Spike 3 at coordinate `a`, `C_a = (1 + 2(a−1)/√p) I`.
    pub fn fig1(p: usize) -> MixtureModel {
        two_class(p, 3.0, 2.0)
    }

    /// Equal (zero) means, `C_a = (1 + 15(a−1)/√p) I`.
    pub fn fig3(p: usize) -> MixtureModel {
        two_class(p, 0.0, 15.0)
    }

    /// Spike 5 at coordinate `a`, `C_a = I`.
    pub fn fig4(p: usize) -> MixtureModel {
        two_class(p, 5.0, 0.0)
    }

    /// Four classes `N(μ₁,C₁), N(μ₁,C₂), N(μ₂,C₁), N(μ₂,C₂)` with spike 5
    /// means and `C_a = (1 + 15(a−1)/√p) I`.
    pub fn fig5(p: usize) -> MixtureModel {
        let mu = [canonical_spike(p, 1, 5.0), canonical_spike(p, 2, 5.0)];
        let c = [scaled_identity(p, 1.0, 0.0), scaled_identity(p, 1.0, 15.0)];
        let means = vec![mu[0].clone(), mu[0].clone(), mu[1].clone(), mu[1].clone()];
        let covariances = vec![c[0].clone(), c[1].clone(), c[0].clone(), c[1].clone()];
        MixtureModel::new(means, covariances, vec![0.25; 4]).expect("preset is valid")
    }
}
