//! Symmetric eigendecompositions, empirical spectral distributions and the
//! Stieltjes-transform fixed point describing the limiting spectrum of a
//! centered random-feature Gram matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
///
/// Each eigenvector is signed so that its entry of largest magnitude is
/// positive (the lowest index wins ties).
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector of the `rank`-th largest eigenvalue (`rank = 0` is the top).
    pub fn top_vector(&self, rank: usize) -> DVector<f64> {
        self.eigenvectors
            .column(self.len() - 1 - rank)
            .into_owned()
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[self.len() - 1]
    }
}

pub(crate) fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full eigendecomposition of `(A + Aᵀ)/2`.
pub fn eig_sym(matrix: &DMatrix<f64>) -> Result<SpectrumResult> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, expected square",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if let Some(i) = matrix.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "matrix entry ({}, {})",
            i % matrix.nrows(),
            i / matrix.nrows()
        )));
    }
    let n = matrix.nrows();
    if n == 0 {
        return Ok(SpectrumResult {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        apply_sign_convention(&mut col);
        eigenvectors.set_column(dst, &DVector::from_vec(col));
    }
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Density-normalized histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    /// Heights such that `Σ density · width` is the fraction of values
    /// inside the range.
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn width(&self, bin: usize) -> f64 {
        self.edges[bin + 1] - self.edges[bin]
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.bins()).map(|b| self.density[b] * self.width(b)).sum()
    }

    /// `∫ |f − g|` between two histograms on identical edges.
    pub fn l1_distance(&self, other: &Histogram) -> Result<f64> {
        if self.edges != other.edges {
            return Err(Error::DimensionMismatch("histograms use different bin edges".into()));
        }
        Ok((0..self.bins())
            .map(|b| (self.density[b] - other.density[b]).abs() * self.width(b))
            .sum())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Histogram of the empirical spectral distribution. Without an explicit
/// range the data extent is used. Values outside the range are not counted,
/// but still weigh in the normalization.
pub fn esd_histogram(eigenvalues: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if eigenvalues.is_empty() {
        return Err(Error::Empty("no eigenvalues to histogram".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let (mut lo, mut hi) = match range {
        Some(r) => r,
        None => eigenvalues
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidArgument(format!("invalid histogram range [{lo}, {hi}]")));
    }
    if hi == lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| lo + width * b as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in eigenvalues {
        if v < lo || v > hi {
            continue;
        }
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = eigenvalues.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    Ok(Histogram { edges, density })
}

/// `‖A − B‖` in operator norm.
pub fn operator_norm_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    operator_norm(&(a - b))
}

/// Spectral norm of a symmetric matrix.
pub fn operator_norm(a: &DMatrix<f64>) -> Result<f64> {
    let spec = eig_sym(a)?;
    Ok(spec.eigenvalues.amax())
}

/// `|uᵀv|` for unit vectors.
pub fn eigenvector_alignment(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", u.len(), v.len())));
    }
    for (name, w) in [("u", u), ("v", v)] {
        let norm = w.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("{name} has norm {norm}, expected 1")));
        }
    }
    Ok(u.dot(v).abs().min(1.0))
}

/// Indices (into the ascending eigenvalues) whose distance to the nearest
/// other eigenvalue exceeds five times the median consecutive gap.
pub fn isolated_eigenvalues(sorted: &[f64]) -> Vec<usize> {
    if sorted.len() < 3 {
        return Vec::new();
    }
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let mut ordered = gaps.clone();
    ordered.sort_by(f64::total_cmp);
    let median = if ordered.len() % 2 == 1 {
        ordered[ordered.len() / 2]
    } else {
        0.5 * (ordered[ordered.len() / 2 - 1] + ordered[ordered.len() / 2])
    };
    let threshold = 5.0 * median;
    (0..sorted.len())
        .filter(|&i| {
            let left = if i > 0 { gaps[i - 1] } else { f64::INFINITY };
            let right = if i < gaps.len() { gaps[i] } else { f64::INFINITY };
            left.min(right) > threshold
        })
        .collect()
}

/// Welch two-sample t-statistic between the entries of `v` labeled `a` and
/// those labeled `b`. Zero when both groups are constant and equal.
pub fn class_separation(v: &[f64], labels: &[usize], a: usize, b: usize) -> Result<f64> {
    if v.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} entries, {} labels", v.len(), labels.len())));
    }
    let moments = |class: usize| -> Result<(f64, f64, f64)> {
        let xs: Vec<f64> = v.iter().zip(labels).filter(|(_, &l)| l == class).map(|(x, _)| *x).collect();
        if xs.len() < 2 {
            return Err(Error::InvalidArgument(format!("class {} needs at least two entries", class + 1)));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok((mean, var, n))
    };
    let (ma, va, na) = moments(a)?;
    let (mb, vb, nb) = moments(b)?;
    let se = (va / na + vb / nb).sqrt();
    if se == 0.0 {
        return Ok(if ma == mb { 0.0 } else { f64::INFINITY });
    }
    Ok((ma - mb).abs() / se)
}

/// Controls for the damped fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `α` in `δ ← (1 − α)δ + α·f(δ)`; halved whenever the
    /// residual grows twice in a row.
    pub damping: f64,
}

impl Default for StieltjesOptions {
    fn default() -> Self {
        StieltjesOptions {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StieltjesSolution {
    pub z: Complex64,
    pub m: Complex64,
    pub delta: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

/// Deterministic equivalent of the resolvent of `G_c` for `n` random
/// features, reduced to the eigenvalues of `Φ_c`:
///
/// ```text
/// δ(z) = (1/n) tr Φ_c Q(z),   Q(z) = (Φ_c/(1 + δ) − zI)⁻¹,   m(z) = (1/T) tr Q(z).
/// ```
#[derive(Debug, Clone)]
pub struct ResolventModel {
    eigenvalues: Vec<f64>,
    n: usize,
}

impl ResolventModel {
    pub fn new(phi_c: &DMatrix<f64>, n: usize) -> Result<Self> {
        let spec = eig_sym(phi_c)?;
        Self::from_eigenvalues(spec.eigenvalues.as_slice(), n)
    }

    pub fn from_eigenvalues(eigenvalues: &[f64], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("feature count n must be positive".into()));
        }
        if eigenvalues.is_empty() {
            return Err(Error::Empty("no eigenvalues".into()));
        }
        Ok(ResolventModel {
            eigenvalues: eigenvalues.to_vec(),
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `f(δ)` and `f'(δ)` of the fixed-point map `δ = f(δ)`.
    fn map(&self, delta: Complex64, z: Complex64) -> (Complex64, Complex64) {
        let scale = 1.0 / (1.0 + delta);
        let (mut value, mut slope) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for &l in &self.eigenvalues {
            let r = 1.0 / (l * scale - z);
            value += l * r;
            slope += l * l * r * r;
        }
        let n = self.n as f64;
        (value / n, slope * scale * scale / n)
    }

    fn stieltjes(&self, delta: Complex64, z: Complex64) -> Complex64 {
        let scale = 1.0 / (1.0 + delta);
        let sum: Complex64 = self
            .eigenvalues
            .iter()
            .map(|&l| 1.0 / (l * scale - z))
            .sum();
        sum / self.dim() as f64
    }

    /// Damped iteration `δ ← (1 − α)δ + α f(δ)` (α halved after two
    /// consecutive residual increases), accelerated by Newton steps on
    /// `f(δ) − δ` whenever they reduce the residual and keep `Im δ ≥ 0`.
    fn refine(
        &self,
        z: Complex64,
        start: Complex64,
        opts: &StieltjesOptions,
        budget: usize,
    ) -> std::result::Result<(Complex64, usize, f64), f64> {
        let upper = z.im > 0.0;
        let admissible = |d: Complex64| d.re.is_finite() && d.im.is_finite() && (!upper || d.im >= 0.0);
        let mut delta = start;
        let mut alpha = opts.damping;
        let mut previous = f64::INFINITY;
        let mut increases = 0;
        let (mut image, mut slope) = self.map(delta, z);
        let mut residual = (image - delta).norm();
        for iter in 0..budget {
            if !residual.is_finite() {
                return Err(residual);
            }
            if residual <= opts.tol {
                return Ok((delta, iter, residual));
            }
            let denom = slope - 1.0;
            let newton = delta - (image - delta) / denom;
            if denom.norm() > 0.0 && admissible(newton) {
                let (ni, ns) = self.map(newton, z);
                let nr = (ni - newton).norm();
                if nr < residual {
                    delta = newton;
                    image = ni;
                    slope = ns;
                    previous = residual;
                    residual = nr;
                    increases = 0;
                    continue;
                }
            }
            if residual > previous {
                increases += 1;
                if increases >= 2 {
                    alpha *= 0.5;
                    increases = 0;
                }
            } else {
                increases = 0;
            }
            previous = residual;
            delta = delta * (1.0 - alpha) + image * alpha;
            (image, slope) = self.map(delta, z);
            residual = (image - delta).norm();
        }
        Err(residual)
    }

    /// Solves for `δ(z)` and `m(z)`.
    ///
    /// Without a starting point and with `Im z > 0`, the solution is
    /// followed from `Im z = max(1, ‖Φ_c‖)` down to the requested height,
    /// which keeps the iteration on the branch with `Im m > 0`. A supplied
    /// starting point that fails to converge falls back to this path.
    pub fn solve(
        &self,
        z: Complex64,
        opts: &StieltjesOptions,
        initial: Option<Complex64>,
    ) -> Result<StieltjesSolution> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("evaluation point z".into()));
        }
        let lambda_min = self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(z.im > 0.0 || (z.im == 0.0 && z.re < lambda_min)) {
            return Err(Error::InvalidArgument(format!(
                "z = {z} must have a positive imaginary part or lie below the spectrum ({lambda_min})"
            )));
        }
        let zero = Complex64::new(0.0, 0.0);
        let direct = match initial {
            Some(d) => Some(self.refine(z, d, opts, opts.max_iter)),
            None if z.im == 0.0 => Some(self.refine(z, zero, opts, opts.max_iter)),
            None => None,
        };
        let (delta, iterations, residual) = match direct {
            Some(Ok(found)) => found,
            Some(Err(residual)) if z.im == 0.0 => {
                return Err(Error::NoConvergence {
                    iterations: opts.max_iter,
                    residual,
                })
            }
            _ => self.continuation(z, opts)?,
        };
        let m = self.stieltjes(delta, z);
        if z.im > 0.0 && m.im < 0.0 {
            return Err(Error::Numerical(format!(
                "Stieltjes value {m} at z = {z} has a negative imaginary part"
            )));
        }
        Ok(StieltjesSolution {
            z,
            m,
            delta,
            iterations,
            residual,
        })
    }

    fn continuation(&self, z: Complex64, opts: &StieltjesOptions) -> Result<(Complex64, usize, f64)> {
        let top = self.norm().max(1.0).max(z.im);
        let mut heights = vec![z.im];
        while heights[heights.len() - 1] * 2.0 < top {
            let next = heights[heights.len() - 1] * 2.0;
            heights.push(next);
        }
        let mut delta = Complex64::new(0.0, 0.0);
        let mut total = 0;
        let mut residual = f64::INFINITY;
        for &y in heights.iter().rev() {
            let zk = Complex64::new(z.re, y);
            match self.refine(zk, delta, opts, opts.max_iter.saturating_sub(total)) {
                Ok((d, it, r)) => {
                    delta = d;
                    total += it;
                    residual = r;
                }
                Err(r) => {
                    return Err(Error::NoConvergence {
                        iterations: opts.max_iter,
                        residual: r,
                    })
                }
            }
        }
        Ok((delta, total, residual))
    }

    /// `ρ(x) ≈ Im m(x + iy)/π` along `x_grid`. With `warm_start` each point
    /// starts from the previous solution, so the sweep is sequential.
    pub fn density(
        &self,
        x_grid: &[f64],
        y: f64,
        opts: &StieltjesOptions,
        warm_start: bool,
    ) -> Result<Vec<f64>> {
        if !(y > 0.0) {
            return Err(Error::InvalidArgument(format!("y must be positive, got {y}")));
        }
        if x_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("x grid must be sorted".into()));
        }
        let mut out = Vec::with_capacity(x_grid.len());
        let mut last = None;
        for (i, &x) in x_grid.iter().enumerate() {
            let init = if warm_start { last } else { None };
            let sol = self
                .solve(Complex64::new(x, y), opts, init)
                .map_err(|e| e.context(format!("density grid point {i} (x = {x})")))?;
            last = Some(sol.delta);
            out.push((sol.m.im / std::f64::consts::PI).max(0.0));
        }
        Ok(out)
    }
}

pub fn stieltjes_solve(
    phi_c: &DMatrix<f64>,
    n: usize,
    z: Complex64,
    opts: &StieltjesOptions,
) -> Result<StieltjesSolution> {
    ResolventModel::new(phi_c, n)?.solve(z, opts, None)
}

/// Default imaginary offset `1e-3 · max(1, ‖Φ_c‖)`.
pub fn default_density_y(phi_c_norm: f64) -> f64 {
    1e-3 * phi_c_norm.max(1.0)
}

/// Limiting spectral density of `G_c` on `x_grid`, warm-started.
pub fn limiting_density(phi_c: &DMatrix<f64>, n: usize, x_grid: &[f64], y: f64) -> Result<Vec<f64>> {
    ResolventModel::new(phi_c, n)?.density(x_grid, y, &StieltjesOptions::default(), true)
}

/// Trapezoid rule.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    #[test]
    fn welch_statistic() {
        let v = [1.0, 2.0, 3.0, 5.0, 6.0, 7.0];
        let labels = [0, 0, 0, 1, 1, 1];
        let t = super::class_separation(&v, &labels, 0, 1).unwrap();
        // means 2 and 6, variances 1, standard error sqrt(2/3)
        assert!((t - 4.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(super::class_separation(&[1.0, 1.0, 1.0, 1.0], &[0, 0, 1, 1], 0, 1).unwrap(), 0.0);
        assert!(super::class_separation(&v, &[0, 1, 1, 1, 1, 1], 0, 1).is_err());
    }

    use super::*;
    use proptest::prelude::*;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::rng::derive_rng(seed, 0);
        let mut a = DMatrix::zeros(n, n);
        crate::rng::fill_standard_normal(&mut rng, a.as_mut_slice());
        (&a + a.transpose()) * 0.5
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    fn det(mut a: DMatrix<f64>) -> f64 {
        let n = a.nrows();
        let mut d = 1.0;
        for c in 0..n {
            let pivot = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
            if a[(pivot, c)] == 0.0 {
                return 0.0;
            }
            if pivot != c {
                a.swap_rows(pivot, c);
                d = -d;
            }
            d *= a[(c, c)];
            for r in c + 1..n {
                let f = a[(r, c)] / a[(c, c)];
                for k in c..n {
                    a[(r, k)] -= f * a[(c, k)];
                }
            }
        }
        d
    }

    /// Roots of det(A − λI) by sign-change scanning and bisection.
    fn charpoly_roots(a: &DMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        let bound = (0..n)
            .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + 1.0;
        let f = |l: f64| det(a - DMatrix::identity(n, n) * l);
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut x0 = -bound;
        let mut f0 = f(x0);
        for s in 1..=steps {
            let x1 = -bound + 2.0 * bound * s as f64 / steps as f64;
            let f1 = f(x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut lo, mut hi, mut flo) = (x0, x1, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid);
                    if fm * flo <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }

    #[test]
    fn identity_and_diagonal() {
        let spec = eig_sym(&DMatrix::identity(4, 4)).unwrap();
        assert!(spec.eigenvalues.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 5.0, 2.0, 4.0]));
        let spec = eig_sym(&d).unwrap();
        for i in 0..5 {
            assert!((spec.eigenvalues[i] - (i + 1) as f64).abs() < 1e-14);
            let v = spec.eigenvectors.column(i);
            let pos = d.diagonal().iter().position(|&x| x == (i + 1) as f64).unwrap();
            assert!((v[pos] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_characteristic_polynomial() {
        let a = random_symmetric(6, 17);
        let roots = charpoly_roots(&a);
        assert_eq!(roots.len(), 6);
        let spec = eig_sym(&a).unwrap();
        for (r, l) in roots.iter().zip(spec.eigenvalues.iter()) {
            assert!((r - l).abs() < 1e-8, "{r} vs {l}");
        }
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        let mut a = DMatrix::identity(3, 3);
        a[(1, 2)] = f64::NAN;
        assert!(eig_sym(&a).is_err());
        assert!(eig_sym(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn decomposition_invariants_at_scale() {
        for (n, seed) in [(1usize, 1u64), (17, 2), (128, 3), (512, 4)] {
            let a = random_symmetric(n, seed);
            let spec = eig_sym(&a).unwrap();
            let v = &spec.eigenvectors;
            let norm = spec.eigenvalues.amax();
            let recon = v * DMatrix::from_diagonal(&spec.eigenvalues) * v.transpose();
            assert!(operator_norm(&(&recon - &a)).unwrap() <= 1e-8 * norm);
            let gram = v.transpose() * v;
            assert!((gram - DMatrix::identity(n, n)).amax() <= 1e-10);
            for i in 0..n {
                let col = v.column(i);
                let residual = (&a * col - col * spec.eigenvalues[i]).norm();
                assert!(residual <= 1e-8 * norm);
                let (imax, vmax) = col.iter().enumerate().fold((0, 0.0f64), |(bi, bv), (j, &x)| {
                    if x.abs() > bv.abs() { (j, x) } else { (bi, bv) }
                });
                assert!(vmax > 0.0, "column {i}, entry {imax}");
            }
            assert!(spec.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn histogram_cases() {
        let h = esd_histogram(&[0.0; 7], 10, None).unwrap();
        assert_eq!(h.density.iter().filter(|&&d| d > 0.0).count(), 1);
        assert!((h.total_mass() - 1.0).abs() < 1e-12);

        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let h = esd_histogram(&grid, 10, Some((0.0, 1.0))).unwrap();
        assert!(h.density.iter().all(|&d| (d - 1.0).abs() < 1e-12));
        assert!(esd_histogram(&[], 4, None).is_err());
        assert!(esd_histogram(&[1.0], 0, None).is_err());
        let other = esd_histogram(&grid, 10, Some((0.0, 2.0))).unwrap();
        assert!(h.l1_distance(&other).is_err());
        assert_eq!(h.l1_distance(&h).unwrap(), 0.0);
    }

    #[test]
    fn norms_and_alignment() {
        let a = random_symmetric(5, 9);
        assert_eq!(operator_norm_diff(&a, &a).unwrap(), 0.0);
        let i = DMatrix::identity(4, 4);
        assert!((operator_norm_diff(&i, &DMatrix::zeros(4, 4)).unwrap() - 1.0).abs() < 1e-14);
        assert!(operator_norm_diff(&i, &a).is_err());

        let u = DVector::from_vec(vec![0.6, 0.8]);
        let v = DVector::from_vec(vec![-0.8, 0.6]);
        assert!((eigenvector_alignment(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(eigenvector_alignment(&u, &v).unwrap().abs() < 1e-15);
        assert!(eigenvector_alignment(&u, &(&v * 2.0)).is_err());
    }

    #[test]
    fn isolated_detection() {
        let mut eigs: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        eigs.push(3.0);
        assert_eq!(isolated_eigenvalues(&eigs), vec![50]);
    }

    fn golden() -> f64 {
        // bisection on δ² + δ − 1 over [0, 1]
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid + mid - 1.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn identity_fixed_point_below_spectrum() {
        let t = 20;
        let sol = stieltjes_solve(&DMatrix::identity(t, t), t, Complex64::new(-1.0, 0.0), &StieltjesOptions::default()).unwrap();
        let g = golden();
        assert!((sol.delta.re - g).abs() < 1e-9);
        assert!((sol.m.re - g).abs() < 1e-9);
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn zero_kernel_gives_free_resolvent() {
        let z = Complex64::new(0.3, 0.2);
        let sol = stieltjes_solve(&DMatrix::zeros(5, 5), 5, z, &StieltjesOptions::default()).unwrap();
        assert_eq!(sol.delta, Complex64::new(0.0, 0.0));
        assert!((sol.m + 1.0 / z).norm() < 1e-15);
        let xs = [-0.2, 0.0, 0.1];
        let y = 0.05;
        let rho = limiting_density(&DMatrix::zeros(5, 5), 5, &xs, y).unwrap();
        for (x, r) in xs.iter().zip(rho) {
            let cauchy = y / (x * x + y * y) / std::f64::consts::PI;
            assert!((r - cauchy).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_evaluation_points() {
        let m = ResolventModel::from_eigenvalues(&[0.5, 1.0], 2).unwrap();
        let opts = StieltjesOptions::default();
        assert!(m.solve(Complex64::new(0.7, 0.0), &opts, None).is_err());
        assert!(m.solve(Complex64::new(0.7, -0.1), &opts, None).is_err());
        assert!(m.density(&[1.0, 0.5], 0.1, &opts, true).is_err());
        let tight = StieltjesOptions { max_iter: 2, ..opts };
        assert!(matches!(
            m.solve(Complex64::new(0.7, 0.01), &tight, None),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn identity_density_has_unit_mass() {
        let t = 200;
        let model = ResolventModel::from_eigenvalues(&vec![1.0; t], t).unwrap();
        let xs: Vec<f64> = (0..=6000).map(|i| -0.5 + i as f64 * 1e-3).collect();
        let rho = model.density(&xs, 1e-3, &StieltjesOptions::default(), true).unwrap();
        let mass = trapezoid(&xs, &rho);
        assert!((mass - 1.0).abs() < 0.05, "mass {mass}");
    }

    #[test]
    fn warm_start_does_not_change_the_answer() {
        let eigs: Vec<f64> = (0..60).map(|i| 0.1 + (i as f64 * 0.37).sin().abs()).collect();
        let model = ResolventModel::from_eigenvalues(&eigs, 90).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| -0.2 + i as f64 * 0.05).collect();
        let opts = StieltjesOptions::default();
        let warm = model.density(&xs, 0.01, &opts, true).unwrap();
        let cold = model.density(&xs, 0.01, &opts, false).unwrap();
        for (w, c) in warm.iter().zip(&cold) {
            assert!((w - c).abs() < 1e-7);
        }
        let again = model.density(&xs, 0.01, &opts, true).unwrap();
        assert_eq!(warm, again);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn nevanlinna(seed in 0u64..10_000, x in -1.0f64..3.0, y in 1e-3f64..1.0, ratio in 0.2f64..4.0) {
            let t = 24;
            let a = random_symmetric(t, seed);
            let phi = &a * a.transpose() / t as f64;
            let phi_c = crate::kernels::center_matrix(&phi);
            let n = ((t as f64) * ratio).ceil() as usize;
            let sol = stieltjes_solve(&phi_c, n, Complex64::new(x, y), &StieltjesOptions::default()).unwrap();
            prop_assert!(sol.m.im > 0.0);
        }
    }
}
