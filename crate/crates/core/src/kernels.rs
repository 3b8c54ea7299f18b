//! Closed-form expected kernels `Φ(a, b) = E_w σ(wᵀa) σ(wᵀb)` for standard
//! Gaussian `w`, centering, and Monte-Carlo random-feature Gram matrices.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_rng, fill_standard_normal};

/// The eleven activations with a closed-form expected kernel.
///
/// `LeakyRelu { pos, neg }` is `pos·max(t, 0) + neg·max(−t, 0)`: `(1, 0)` is
/// the ReLU, `(1, −1)` the identity and `(1, 1)` the absolute value.
/// `Quadratic { a2, a1, a0 }` is `a2·t² + a1·t + a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Linear,
    Relu,
    Abs,
    LeakyRelu { pos: f64, neg: f64 },
    Indicator,
    Sign,
    Quadratic { a2: f64, a1: f64, a0: f64 },
    Cos,
    Sin,
    Erf,
    GaussExp,
}

impl Activation {
    /// One representative of every row, parameterized ones at their
    /// textbook settings.
    pub fn catalog() -> Vec<Activation> {
        vec![
            Activation::Linear,
            Activation::Relu,
            Activation::Abs,
            Activation::LeakyRelu { pos: 1.0, neg: 0.2 },
            Activation::Indicator,
            Activation::Sign,
            Activation::Quadratic { a2: 1.0, a1: 1.0, a0: 1.0 },
            Activation::Cos,
            Activation::Sin,
            Activation::Erf,
            Activation::GaussExp,
        ]
    }

    /// Pointwise `σ(t)`. `1_{t>0}` and `sign` evaluate to 0 at `t = 0`.
    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        match *self {
            Activation::Linear => t,
            Activation::Relu => t.max(0.0),
            Activation::Abs => t.abs(),
            Activation::LeakyRelu { pos, neg } => pos * t.max(0.0) + neg * (-t).max(0.0),
            Activation::Indicator => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sign => {
                if t > 0.0 {
                    1.0
                } else if t < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::Quadratic { a2, a1, a0 } => a2 * t * t + a1 * t + a0,
            Activation::Cos => t.cos(),
            Activation::Sin => t.sin(),
            Activation::Erf => libm::erf(t),
            Activation::GaussExp => (-0.5 * t * t).exp(),
        }
    }

    /// `Φ` from the three moments it depends on: `‖a‖²`, `‖b‖²` and `aᵀb`.
    ///
    /// Rows dividing by `‖a‖‖b‖` take the value of the pointwise convention
    /// at a zero vector: `σ(wᵀ0) = σ(0) = 0` for ReLU, |t|, LReLU, 1_{t>0}
    /// and sign, hence `Φ = 0`.
    pub fn expected_product(&self, norm2_a: f64, norm2_b: f64, dot: f64) -> f64 {
        let norms = (norm2_a * norm2_b).sqrt();
        let cosine = || (dot / norms).clamp(-1.0, 1.0);
        match *self {
            Activation::Linear => dot,
            Activation::Relu => {
                if norms == 0.0 {
                    return 0.0;
                }
                let c = cosine();
                norms / (2.0 * PI) * (c * (-c).acos() + (1.0 - c * c).sqrt())
            }
            Activation::Abs => {
                if norms == 0.0 {
                    return 0.0;
                }
                let c = cosine();
                2.0 / PI * norms * (c * c.asin() + (1.0 - c * c).sqrt())
            }
            Activation::LeakyRelu { pos, neg } => {
                if norms == 0.0 {
                    return 0.0;
                }
                let c = cosine();
                0.5 * (pos * pos + neg * neg) * dot
                    + norms / (2.0 * PI)
                        * (pos + neg).powi(2)
                        * ((1.0 - c * c).sqrt() - c * c.acos())
            }
            Activation::Indicator => {
                if norms == 0.0 {
                    return 0.0;
                }
                0.5 - cosine().acos() / (2.0 * PI)
            }
            Activation::Sign => {
                if norms == 0.0 {
                    return 0.0;
                }
                2.0 / PI * cosine().asin()
            }
            Activation::Quadratic { a2, a1, a0 } => {
                a2 * a2 * (2.0 * dot * dot + norm2_a * norm2_b)
                    + a1 * a1 * dot
                    + a2 * a0 * (norm2_a + norm2_b)
                    + a0 * a0
            }
            Activation::Cos => (-0.5 * (norm2_a + norm2_b)).exp() * dot.cosh(),
            Activation::Sin => (-0.5 * (norm2_a + norm2_b)).exp() * dot.sinh(),
            Activation::Erf => {
                let arg = 2.0 * dot / ((1.0 + 2.0 * norm2_a) * (1.0 + 2.0 * norm2_b)).sqrt();
                2.0 / PI * arg.clamp(-1.0, 1.0).asin()
            }
            Activation::GaussExp => {
                1.0 / ((1.0 + norm2_a) * (1.0 + norm2_b) - dot * dot).sqrt()
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Linear => write!(f, "linear"),
            Activation::Relu => write!(f, "relu"),
            Activation::Abs => write!(f, "abs"),
            Activation::LeakyRelu { pos, neg } => write!(f, "lrelu:{pos}:{neg}"),
            Activation::Indicator => write!(f, "indicator"),
            Activation::Sign => write!(f, "sign"),
            Activation::Quadratic { a2, a1, a0 } => write!(f, "quad:{a2}:{a1}:{a0}"),
            Activation::Cos => write!(f, "cos"),
            Activation::Sin => write!(f, "sin"),
            Activation::Erf => write!(f, "erf"),
            Activation::GaussExp => write!(f, "gauss-exp"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownActivation(s.to_string());
        let mut parts = s.trim().split(':');
        let name = parts.next().ok_or_else(unknown)?.to_ascii_lowercase();
        let params = parts
            .map(|v| v.trim().parse::<f64>().map_err(|_| unknown()))
            .collect::<Result<Vec<_>>>()?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(unknown());
        }
        let kind = match (name.as_str(), params.as_slice()) {
            ("linear", []) => Activation::Linear,
            ("relu", []) => Activation::Relu,
            ("abs", []) => Activation::Abs,
            ("lrelu", [pos, neg]) => Activation::LeakyRelu { pos: *pos, neg: *neg },
            ("indicator", []) => Activation::Indicator,
            ("sign", []) => Activation::Sign,
            ("quad", [a2, a1, a0]) => Activation::Quadratic { a2: *a2, a1: *a1, a0: *a0 },
            ("cos", []) => Activation::Cos,
            ("sin", []) => Activation::Sin,
            ("erf", []) => Activation::Erf,
            ("gauss-exp", []) => Activation::GaussExp,
            _ => return Err(unknown()),
        };
        Ok(kind)
    }
}

/// Parses a comma separated list such as `relu,abs,lrelu:1:0.5`.
pub fn parse_activation_list(s: &str) -> Result<Vec<Activation>> {
    s.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}]"))),
        None => Ok(()),
    }
}

/// Cosine similarity `aᵀb/(‖a‖‖b‖)`, clamped to `[−1, 1]`.
pub fn angle(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.len(), b.len())));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("angle of a zero-norm vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn phi_entry(kind: Activation, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.len(), b.len())));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let na2 = a.iter().map(|v| v * v).sum::<f64>();
    let nb2 = b.iter().map(|v| v * v).sum::<f64>();
    let dot = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let v = kind.expected_product(na2, nb2, dot);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("{kind} kernel value")));
    }
    Ok(v)
}

/// A symmetric `T × T` kernel matrix, optionally known to be centered.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub centered: bool,
}

impl KernelMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        KernelMatrix {
            values,
            centered: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

/// `Φ_ij = Φ(x_i, x_j)` over the columns of `x`.
pub fn phi_matrix(kind: Activation, x: &DMatrix<f64>) -> Result<KernelMatrix> {
    check_finite(x.as_slice(), "X")?;
    let gram = x.transpose() * x;
    let t = x.ncols();
    let mut values = DMatrix::zeros(t, t);
    for j in 0..t {
        for i in 0..=j {
            let v = kind.expected_product(gram[(i, i)], gram[(j, j)], gram[(i, j)]);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{kind} kernel at ({i}, {j})")));
            }
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(KernelMatrix::new(values))
}

/// `P·A·P` with `P = I − 11ᵀ/T`.
pub fn center_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let t = a.nrows();
    let n = t as f64;
    let row_means: Vec<f64> = (0..t).map(|i| a.row(i).sum() / n).collect();
    let col_means: Vec<f64> = (0..t).map(|j| a.column(j).sum() / n).collect();
    let grand = row_means.iter().sum::<f64>() / n;
    DMatrix::from_fn(t, a.ncols(), |i, j| a[(i, j)] - row_means[i] - col_means[j] + grand)
}

pub fn center(mat: &KernelMatrix) -> KernelMatrix {
    KernelMatrix {
        values: center_matrix(&mat.values),
        centered: true,
    }
}

/// Gram matrix `(1/n) σ(WX)ᵀ σ(WX)` of one draw of `W` (`n × p`, i.i.d.
/// standard Gaussian entries) taken from `rng`.
pub fn random_feature_gram(
    kind: Activation,
    x: &DMatrix<f64>,
    n: usize,
    rng: &mut crate::rng::Rng,
) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, x.nrows());
    fill_standard_normal(rng, w.as_mut_slice());
    let mut features = w * x;
    features.apply(|v| *v = kind.apply(*v));
    features.transpose() * &features / n as f64
}

/// Average of `realizations` independent random-feature Gram matrices.
#[derive(Debug, Clone)]
pub struct MonteCarloGram {
    pub mean: DMatrix<f64>,
    /// Every realization, when requested.
    pub samples: Option<Vec<DMatrix<f64>>>,
}

const REALIZATION_CHUNK: usize = 8;

/// Realization `r` draws `W` from stream `r` of `seed`; realizations are
/// summed in index order within fixed chunks, so the result does not depend
/// on the number of worker threads.
pub fn monte_carlo_gram(
    kind: Activation,
    x: &DMatrix<f64>,
    n: usize,
    realizations: usize,
    seed: u64,
    keep_samples: bool,
) -> Result<MonteCarloGram> {
    if n == 0 {
        return Err(Error::InvalidArgument("feature count n must be positive".into()));
    }
    if realizations == 0 {
        return Err(Error::InvalidArgument("at least one realization is required".into()));
    }
    check_finite(x.as_slice(), "X")?;
    let t = x.ncols();
    let one = |r: usize| {
        let mut rng = derive_rng(seed, r as u64);
        random_feature_gram(kind, x, n, &mut rng)
    };
    if keep_samples {
        let samples: Vec<DMatrix<f64>> = (0..realizations).into_par_iter().map(one).collect();
        let mut mean = DMatrix::zeros(t, t);
        for s in &samples {
            mean += s;
        }
        mean /= realizations as f64;
        return Ok(MonteCarloGram {
            mean,
            samples: Some(samples),
        });
    }
    let chunks: Vec<DMatrix<f64>> = (0..realizations.div_ceil(REALIZATION_CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * REALIZATION_CHUNK;
            let end = (start + REALIZATION_CHUNK).min(realizations);
            let mut acc = DMatrix::zeros(t, t);
            for r in start..end {
                acc += one(r);
            }
            acc
        })
        .collect();
    let mut mean = DMatrix::zeros(t, t);
    for c in &chunks {
        mean += c;
    }
    mean /= realizations as f64;
    Ok(MonteCarloGram {
        mean,
        samples: None,
    })
}
