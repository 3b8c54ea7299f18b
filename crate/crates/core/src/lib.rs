//! Spectral analysis of random feature maps on high-dimensional data.
//!
//! The crate computes the expected Gram matrix `Φ(a, b) = E_w σ(wᵀa) σ(wᵀb)`
//! of random features `σ(WX)` for eleven activations in closed form, builds a
//! nonlinearity-free asymptotic equivalent of its centered version for
//! Gaussian-mixture data, and provides the spectral tooling used to compare
//! the two: symmetric eigendecompositions, empirical spectral distributions,
//! a Stieltjes-transform fixed-point solver and random-feature spectral
//! clustering.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`gmm`] | Gaussian mixture sampling, class statistics, `τ` estimation |
//! | [`kernels`] | Activations, closed-form `Φ`, centering, Monte-Carlo Gram |
//! | [`equivalent`] | `d₀, d₁, d₂` coefficients, equivalent kernel, spiked form |
//! | [`spectrum`] | Eigendecomposition, histograms, Stieltjes solver |
//! | [`cluster`] | Spectral embedding, k-means, accuracy, experiments |
//! | [`io`] | IDX/EEG ingestion, configs, CSV/SVG emission, experiments |
//!
//! Data follow the convention `x_i = μ_a/√p + ω_i` with `ω_i ~ N(0, C_a/p)`:
//! observations are the columns of a `p × T` matrix.

pub mod cluster;
pub mod equivalent;
pub mod error;
pub mod gmm;
pub mod io;
pub mod kernels;
pub mod rng;
pub mod spectrum;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
