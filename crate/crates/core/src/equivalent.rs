//! Nonlinearity-free equivalent of the centered expected kernel.
//!
//! For Gaussian-mixture data the centered kernel `Φ_c = PΦP` is close in
//! operator norm to `P Φ̃ P` with
//!
//! ```text
//! Φ̃ = d₁ (Ω + MJᵀ/√p)ᵀ (Ω + MJᵀ/√p) + d₂ U B Uᵀ + d₀ I_T,
//! U = [J/√p, φ],   B = [[ttᵀ + 2S, t], [tᵀ, 1]],
//! ```
//!
//! where only the three scalars `d₀, d₁, d₂` depend on the activation (and on
//! `τ`). `d₁` weighs the means, `d₂` the covariance traces and shapes.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gmm::{ClassStatistics, DataSet};
use crate::kernels::{Activation, KernelMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentCoefficients {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub tau: f64,
}

pub fn coefficients(kind: Activation, tau: f64) -> Result<EquivalentCoefficients> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let (d0, d1, d2) = match kind {
        Activation::Linear => (0.0, 1.0, 0.0),
        Activation::Relu => ((0.25 - 1.0 / (2.0 * PI)) * tau, 0.25, 1.0 / (8.0 * PI * tau)),
        Activation::Abs => ((1.0 - 2.0 / PI) * tau, 0.0, 1.0 / (2.0 * PI * tau)),
        Activation::LeakyRelu { pos, neg } => {
            let sum2 = (pos + neg).powi(2);
            (
                (PI - 2.0) / (4.0 * PI) * sum2 * tau,
                0.25 * (pos - neg).powi(2),
                sum2 / (8.0 * tau * PI),
            )
        }
        Activation::Indicator => (0.25 - 1.0 / (2.0 * PI), 1.0 / (2.0 * PI * tau), 0.0),
        Activation::Sign => (1.0 - 2.0 / PI, 2.0 / (PI * tau), 0.0),
        Activation::Quadratic { a2, a1, .. } => (2.0 * tau * tau * a2 * a2, a1 * a1, a2 * a2),
        Activation::Cos => (
            0.5 + (-2.0 * tau).exp() / 2.0 - (-tau).exp(),
            0.0,
            (-tau).exp() / 4.0,
        ),
        Activation::Sin => (
            0.5 - (-2.0 * tau).exp() / 2.0 - tau * (-tau).exp(),
            (-tau).exp(),
            0.0,
        ),
        Activation::Erf => {
            let r = 2.0 * tau / (2.0 * tau + 1.0);
            (2.0 / PI * (r.acos() - r), 4.0 / PI / (2.0 * tau + 1.0), 0.0)
        }
        Activation::GaussExp => (
            1.0 / (2.0 * tau + 1.0).sqrt() - 1.0 / (tau + 1.0),
            0.0,
            1.0 / (4.0 * (tau + 1.0).powi(3)),
        ),
    };
    Ok(EquivalentCoefficients { d0, d1, d2, tau })
}

/// Which data statistics an activation can see, asymptotically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Taxonomy {
    /// `d₁ ≠ 0`, `d₂ = 0`: only differences in means.
    MeanOriented,
    /// `d₁ = 0`, `d₂ ≠ 0`: only differences in covariances.
    CovarianceOriented,
    Balanced,
    /// Both coefficients vanish, e.g. a constant quadratic.
    Degenerate,
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Taxonomy::MeanOriented => "mean-oriented",
            Taxonomy::CovarianceOriented => "covariance-oriented",
            Taxonomy::Balanced => "balanced",
            Taxonomy::Degenerate => "degenerate",
        })
    }
}

pub fn classify(coeffs: &EquivalentCoefficients) -> Taxonomy {
    let eps = 1e-12 * 1f64.max(coeffs.d1.abs()).max(coeffs.d2.abs());
    match (coeffs.d1.abs() > eps, coeffs.d2.abs() > eps) {
        (true, false) => Taxonomy::MeanOriented,
        (false, true) => Taxonomy::CovarianceOriented,
        (true, true) => Taxonomy::Balanced,
        (false, false) => Taxonomy::Degenerate,
    }
}

/// Taxonomy of an activation. Every row keeps its class for all `τ > 0`,
/// so it is evaluated at `τ = 1`.
pub fn taxonomy_of(kind: Activation) -> Taxonomy {
    classify(&coefficients(kind, 1.0).expect("tau = 1 is valid"))
}

fn check_dims(data: &DataSet, stats: &ClassStatistics) -> Result<(usize, usize, usize)> {
    let (p, t) = data.omega.shape();
    let k = stats.m.ncols();
    let checks = [
        (stats.m.nrows() == p, format!("M has {} rows, Ω has {p}", stats.m.nrows())),
        (data.j.shape() == (t, k), format!("J is {:?}, expected ({t}, {k})", data.j.shape())),
        (data.phi.len() == t, format!("φ has length {}, expected {t}", data.phi.len())),
        (stats.t.len() == k, format!("t has length {}, expected {k}", stats.t.len())),
        (stats.s.shape() == (k, k), format!("S is {:?}, expected ({k}, {k})", stats.s.shape())),
    ];
    for (ok, msg) in checks {
        if !ok {
            return Err(Error::DimensionMismatch(msg));
        }
    }
    Ok((p, t, k))
}

/// `[[ttᵀ + 2S, t], [tᵀ, 1]]`.
fn trace_shape_block(stats: &ClassStatistics) -> DMatrix<f64> {
    let k = stats.t.len();
    let mut b = DMatrix::zeros(k + 1, k + 1);
    let top = &stats.t * stats.t.transpose() + &stats.s * 2.0;
    b.view_mut((0, 0), (k, k)).copy_from(&top);
    for a in 0..k {
        b[(a, k)] = stats.t[a];
        b[(k, a)] = stats.t[a];
    }
    b[(k, k)] = 1.0;
    b
}

/// `U = [J/√p, φ]`.
fn class_noise_basis(data: &DataSet, p: usize) -> DMatrix<f64> {
    let (t, k) = data.j.shape();
    let mut u = DMatrix::zeros(t, k + 1);
    u.view_mut((0, 0), (t, k)).copy_from(&(&data.j / (p as f64).sqrt()));
    u.set_column(k, &data.phi);
    u
}

/// The uncentered equivalent `Φ̃`; center it to compare with `Φ_c`.
pub fn build_equivalent(
    data: &DataSet,
    stats: &ClassStatistics,
    coeffs: &EquivalentCoefficients,
) -> Result<KernelMatrix> {
    let (p, t, _) = check_dims(data, stats)?;
    let y = &data.omega + &stats.m * data.j.transpose() / (p as f64).sqrt();
    let mut phi = y.transpose() * &y * coeffs.d1;
    if coeffs.d2 != 0.0 {
        let u = class_noise_basis(data, p);
        phi += &u * trace_shape_block(stats) * u.transpose() * coeffs.d2;
    }
    for i in 0..t {
        phi[(i, i)] += coeffs.d0;
    }
    Ok(KernelMatrix::new(phi))
}

/// Low-rank-plus-noise form `Φ̃ = d₁ΩᵀΩ + V A Vᵀ + d₀ I` with
/// `V = [J/√p, φ, ΩᵀM]` and
///
/// ```text
///     | A₁₁     d₂t   d₁I_K |
/// A = | d₂tᵀ    d₂    0     |,   A₁₁ = d₁MᵀM + d₂(ttᵀ + 2S).
///     | d₁I_K   0     0     |
/// ```
#[derive(Debug, Clone)]
pub struct SpikedForm {
    /// `T × (2K + 1)`.
    pub v: DMatrix<f64>,
    /// `(2K + 1) × (2K + 1)`, symmetric.
    pub a: DMatrix<f64>,
    /// `K × K`.
    pub a11: DMatrix<f64>,
}

impl SpikedForm {
    /// The informative part `V A Vᵀ`; its rank is at most `2K + 1`.
    pub fn low_rank(&self) -> DMatrix<f64> {
        &self.v * &self.a * self.v.transpose()
    }

    /// `d₁ΩᵀΩ + VAVᵀ + d₀I`.
    pub fn recompose(&self, omega: &DMatrix<f64>, coeffs: &EquivalentCoefficients) -> DMatrix<f64> {
        let mut out = omega.transpose() * omega * coeffs.d1 + self.low_rank();
        for i in 0..out.nrows() {
            out[(i, i)] += coeffs.d0;
        }
        out
    }
}

pub fn build_spiked(
    data: &DataSet,
    stats: &ClassStatistics,
    coeffs: &EquivalentCoefficients,
) -> Result<SpikedForm> {
    let (p, t, k) = check_dims(data, stats)?;
    let (d1, d2) = (coeffs.d1, coeffs.d2);
    let mut v = DMatrix::zeros(t, 2 * k + 1);
    v.view_mut((0, 0), (t, k + 1)).copy_from(&class_noise_basis(data, p));
    v.view_mut((0, k + 1), (t, k))
        .copy_from(&(data.omega.transpose() * &stats.m));

    let a11 = stats.m.transpose() * &stats.m * d1
        + (&stats.t * stats.t.transpose() + &stats.s * 2.0) * d2;
    let mut a = DMatrix::zeros(2 * k + 1, 2 * k + 1);
    a.view_mut((0, 0), (k, k)).copy_from(&a11);
    for i in 0..k {
        a[(i, k)] = d2 * stats.t[i];
        a[(k, i)] = d2 * stats.t[i];
        a[(i, k + 1 + i)] = d1;
        a[(k + 1 + i, i)] = d1;
    }
    a[(k, k)] = d2;
    Ok(SpikedForm { v, a, a11 })
}

/// Leaky-ReLU parameters `(ς₊, ς₋)` with `ς₊ + ς₋ = 2` whose coefficient
/// ratio `d₁/d₂ = 2πτ (ς₊ − ς₋)² / (ς₊ + ς₋)²` equals `ratio`.
pub fn ratio_to_lrelu(ratio: f64, tau: f64) -> Result<(f64, f64)> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!("ratio must be positive, got {ratio}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let root = (ratio / (2.0 * PI * tau)).sqrt();
    Ok((1.0 + root, 1.0 - root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::{class_statistics, presets, sample_mixture};
    use crate::kernels::{center_matrix, phi_matrix};

    fn op_norm(a: &DMatrix<f64>) -> f64 {
        nalgebra::SymmetricEigen::new((a + a.transpose()) * 0.5).eigenvalues.amax()
    }

    #[test]
    fn table_values() {
        let lin = coefficients(Activation::Linear, 3.7).unwrap();
        assert_eq!((lin.d0, lin.d1, lin.d2), (0.0, 1.0, 0.0));
        let relu = coefficients(Activation::Relu, 1.0).unwrap();
        assert!((relu.d0 - 0.090845).abs() < 1e-5);
        assert_eq!(relu.d1, 0.25);
        assert!((relu.d2 - 0.0397887).abs() < 1e-6);
        assert!(coefficients(Activation::Relu, 0.0).is_err());
        assert!(coefficients(Activation::Relu, -1.0).is_err());
    }

    #[test]
    fn quadratic_ignores_constant() {
        for a0 in [0.0, 1.0, -4.0] {
            let c = coefficients(Activation::Quadratic { a2: 0.5, a1: 2.0, a0 }, 1.5).unwrap();
            assert_eq!((c.d0, c.d1, c.d2), (2.0 * 1.5 * 1.5 * 0.25, 4.0, 0.25));
        }
    }

    #[test]
    fn taxonomy_lists() {
        use Taxonomy::*;
        let expected = [
            ("linear", MeanOriented),
            ("indicator", MeanOriented),
            ("sign", MeanOriented),
            ("sin", MeanOriented),
            ("erf", MeanOriented),
            ("abs", CovarianceOriented),
            ("cos", CovarianceOriented),
            ("gauss-exp", CovarianceOriented),
            ("relu", Balanced),
            ("lrelu:1:0.3", Balanced),
            ("quad:1:1:0", Balanced),
            ("quad:0:0:3", Degenerate),
        ];
        for tau in [0.5, 1.0, 2.0] {
            for (name, class) in expected {
                let kind: Activation = name.parse().unwrap();
                assert_eq!(classify(&coefficients(kind, tau).unwrap()), class, "{name} at {tau}");
            }
        }
    }

    #[test]
    fn linear_equivalent_is_exact() {
        let model = presets::fig1(64);
        let data = sample_mixture(&model, 32, 1).unwrap();
        let stats = class_statistics(&model, &data.class_sizes).unwrap();
        let coeffs = coefficients(Activation::Linear, stats.tau).unwrap();
        let eq = build_equivalent(&data, &stats, &coeffs).unwrap();
        let phi = phi_matrix(Activation::Linear, &data.x).unwrap();
        let diff = center_matrix(&phi.values) - center_matrix(&eq.values);
        assert!(op_norm(&diff) <= 1e-10);
    }

    #[test]
    fn constant_only_equivalent_is_scaled_identity() {
        let model = presets::fig1(16);
        let data = sample_mixture(&model, 8, 2).unwrap();
        let stats = class_statistics(&model, &data.class_sizes).unwrap();
        let coeffs = EquivalentCoefficients { d0: 0.7, d1: 0.0, d2: 0.0, tau: 1.0 };
        let eq = build_equivalent(&data, &stats, &coeffs).unwrap();
        assert_eq!(eq.values, DMatrix::identity(8, 8) * 0.7);
    }

    #[test]
    fn spiked_layout_for_two_classes() {
        let model = presets::fig1(32);
        let data = sample_mixture(&model, 16, 3).unwrap();
        let stats = class_statistics(&model, &data.class_sizes).unwrap();
        let c = coefficients(Activation::Relu, stats.tau).unwrap();
        let s = build_spiked(&data, &stats, &c).unwrap();
        assert_eq!(s.a.shape(), (5, 5));
        assert_eq!(s.v.shape(), (16, 5));
        assert_eq!(s.a, s.a.transpose());
        assert_eq!(s.a[(0, 3)], c.d1);
        assert_eq!(s.a[(1, 4)], c.d1);
        assert_eq!(s.a[(0, 4)], 0.0);
        assert_eq!(s.a[(2, 2)], c.d2);
        assert_eq!(s.a[(2, 3)], 0.0);
        assert!(s.a.view((3, 3), (2, 2)).iter().all(|&v| v == 0.0));
        let rank = s.low_rank().rank(1e-9 * s.low_rank().amax());
        assert!(rank <= 5);
    }

    #[test]
    fn spiked_without_means() {
        let model = presets::fig3(32);
        let data = sample_mixture(&model, 12, 4).unwrap();
        let stats = class_statistics(&model, &data.class_sizes).unwrap();
        let c = coefficients(Activation::Relu, stats.tau).unwrap();
        let s = build_spiked(&data, &stats, &c).unwrap();
        assert!(s.v.columns(3, 2).iter().all(|&v| v == 0.0));
        let u = class_noise_basis(&data, 32);
        let expected = &u * trace_shape_block(&stats) * u.transpose() * c.d2;
        assert!((s.low_rank() - expected).amax() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let model = presets::fig1(16);
        let data = sample_mixture(&model, 8, 2).unwrap();
        let mut stats = class_statistics(&model, &data.class_sizes).unwrap();
        stats.s = DMatrix::zeros(3, 3);
        let c = coefficients(Activation::Relu, 1.0).unwrap();
        assert!(matches!(build_equivalent(&data, &stats, &c), Err(Error::DimensionMismatch(_))));
        assert!(build_spiked(&data, &stats, &c).is_err());
    }

    #[test]
    fn lrelu_ratio_solver() {
        for tau in [0.5, 1.0, 2.3] {
            for ratio in [1e-3, 0.1, 1.0, 7.0, 250.0] {
                let (pos, neg) = ratio_to_lrelu(ratio, tau).unwrap();
                assert!((pos + neg - 2.0).abs() < 1e-15);
                let c = coefficients(Activation::LeakyRelu { pos, neg }, tau).unwrap();
                assert!((c.d1 / c.d2 - ratio).abs() < 1e-10 * ratio);
                let formula = 2.0 * PI * tau * (pos - neg).powi(2) / (pos + neg).powi(2);
                assert!((formula - ratio).abs() < 1e-10 * ratio);
            }
        }
        assert!(ratio_to_lrelu(0.0, 1.0).is_err());
    }
}
