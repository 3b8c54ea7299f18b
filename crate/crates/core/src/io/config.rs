//! JSON configuration for mixtures and experiments.
//!
//! Unknown keys are rejected and every experiment file carries a
//! `schema_version`, currently [`SCHEMA_VERSION`].

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gmm::{presets, MixtureModel};
use crate::kernels::Activation;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXPERIMENT_IDS: [&str; 10] = [
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "table3", "table4", "table5", "custom",
];

/// A mean vector: dense values or a generator such as
/// `"canonical_spike(1, 3)"` or `"zeros"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Dense(Vec<f64>),
    Named(String),
}

/// A covariance: dense rows or a generator such as
/// `"scaled_identity(1, 2)"` or `"identity"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Dense(Vec<Vec<f64>>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub means: Vec<VectorSpec>,
    pub covariances: Vec<MatrixSpec>,
    pub proportions: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn parse_call(spec: &str) -> Result<(String, Vec<f64>)> {
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        None => (spec, ""),
        Some(open) => {
            let inner = spec[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Config(format!("unbalanced parentheses in {spec:?}")))?;
            (&spec[..open], inner)
        }
    };
    let args = if args.trim().is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad argument {:?} in {spec:?}", a.trim())))
            })
            .collect::<Result<_>>()?
    };
    Ok((name.trim().to_string(), args))
}

fn arity(spec: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::Config(format!("{spec:?} takes {n} arguments, got {}", args.len())))
    }
}

impl VectorSpec {
    pub fn build(&self, p: usize) -> Result<DVector<f64>> {
        match self {
            VectorSpec::Dense(v) => {
                if v.len() != p {
                    return Err(Error::Config(format!("mean has length {}, expected p = {p}", v.len())));
                }
                Ok(DVector::from_column_slice(v))
            }
            VectorSpec::Named(s) => {
                let (name, args) = parse_call(s)?;
                match name.as_str() {
                    "zeros" => {
                        arity(s, &args, 0)?;
                        Ok(DVector::zeros(p))
                    }
                    "canonical_spike" => {
                        arity(s, &args, 2)?;
                        let index = args[0];
                        if index.fract() != 0.0 || index < 1.0 || index > p as f64 {
                            return Err(Error::Config(format!("spike index in {s:?} must be an integer in 1..={p}")));
                        }
                        Ok(presets::canonical_spike(p, index as usize, args[1]))
                    }
                    _ => Err(Error::Config(format!("unknown mean generator {s:?}"))),
                }
            }
        }
    }
}

impl MatrixSpec {
    pub fn build(&self, p: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Dense(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::Config(format!("covariance must be {p} × {p}")));
                }
                Ok(DMatrix::from_fn(p, p, |r, c| rows[r][c]))
            }
            MatrixSpec::Named(s) => {
                let (name, args) = parse_call(s)?;
                match name.as_str() {
                    "identity" => {
                        arity(s, &args, 0)?;
                        Ok(DMatrix::identity(p, p))
                    }
                    "scaled_identity" => {
                        arity(s, &args, 2)?;
                        Ok(presets::scaled_identity(p, args[0], args[1]))
                    }
                    _ => Err(Error::Config(format!("unknown covariance generator {s:?}"))),
                }
            }
        }
    }
}

impl MixtureConfig {
    pub fn build(&self) -> Result<MixtureModel> {
        if self.p == 0 || self.k == 0 {
            return Err(Error::Config("p and K must be positive".into()));
        }
        if self.means.len() != self.k || self.covariances.len() != self.k || self.proportions.len() != self.k {
            return Err(Error::Config(format!(
                "K = {} but {} means, {} covariances, {} proportions",
                self.k,
                self.means.len(),
                self.covariances.len(),
                self.proportions.len()
            )));
        }
        let means = self.means.iter().map(|m| m.build(self.p)).collect::<Result<_>>()?;
        let covs = self.covariances.iter().map(|c| c.build(self.p)).collect::<Result<_>>()?;
        MixtureModel::new(means, covs, self.proportions.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

/// Where observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Inline mixture.
    Mixture(MixtureConfig),
    /// Mixture stored in a separate JSON file.
    MixtureFile(PathBuf),
    /// MNIST restricted to `digits`, read from `root` or the data directory.
    Mnist {
        #[serde(default)]
        root: Option<PathBuf>,
        #[serde(default = "default_digits")]
        digits: Vec<u8>,
    },
    /// EEG sets B and E.
    Eeg {
        #[serde(default)]
        root: Option<PathBuf>,
    },
}

fn default_digits() -> Vec<u8> {
    vec![6, 8]
}

/// Which `τ` feeds the equivalent-kernel coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    /// `tr(C°)/p` from the model.
    #[default]
    Model,
    /// The data-driven estimate `(1/T) Σ ‖x_i‖²`.
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default)]
    pub data: Option<DataConfig>,
    /// Activation strings; each experiment has its own default.
    #[serde(default)]
    pub activations: Vec<String>,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(rename = "T", default)]
    pub t: Option<usize>,
    /// Sample sizes for clustering tables.
    #[serde(rename = "T_list", default)]
    pub t_list: Option<Vec<usize>>,
    /// Number of random features.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub runs: Option<usize>,
    /// Monte-Carlo realizations of `W` used to estimate `Φ`; the closed form
    /// is used when absent.
    #[serde(default)]
    pub realizations: Option<usize>,
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub tau_source: TauSource,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Root of the MNIST/EEG files when `data` does not name one.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for a given experiment id, writing into `output_dir`.
    pub fn for_id(id: &str, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: id.into(),
            data: None,
            activations: Vec::new(),
            p: None,
            t: None,
            t_list: None,
            n: None,
            runs: None,
            realizations: None,
            bins: None,
            tau_source: TauSource::Model,
            seed: 0,
            output_dir: output_dir.into(),
            data_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if !EXPERIMENT_IDS.contains(&self.experiment.as_str()) {
            return Err(Error::Config(format!(
                "unknown experiment {:?}; valid ids: {}",
                self.experiment,
                EXPERIMENT_IDS.join(", ")
            )));
        }
        let positives = [
            ("p", self.p),
            ("T", self.t),
            ("n", self.n),
            ("runs", self.runs),
            ("realizations", self.realizations),
            ("bins", self.bins),
        ];
        for (name, value) in positives {
            if value == Some(0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if let Some(list) = &self.t_list {
            if list.is_empty() || list.contains(&0) {
                return Err(Error::Config("T_list must hold positive sizes".into()));
            }
        }
        for a in &self.activations {
            a.parse::<Activation>()?;
        }
        let mut paths: Vec<&Path> = Vec::new();
        if let Some(d) = &self.data_dir {
            paths.push(d);
        }
        match &self.data {
            Some(DataConfig::MixtureFile(f)) => paths.push(f),
            Some(DataConfig::Mnist { root: Some(r), .. }) | Some(DataConfig::Eeg { root: Some(r) }) => paths.push(r),
            _ => {}
        }
        for path in paths {
            if !path.exists() {
                return Err(Error::Config(format!("{} does not exist", path.display())));
            }
        }
        if self.experiment == "custom" && self.data.is_none() {
            return Err(Error::Config("custom experiments need a data source".into()));
        }
        Ok(())
    }

    pub fn activation_list(&self, default: &[Activation]) -> Result<Vec<Activation>> {
        if self.activations.is_empty() {
            Ok(default.to_vec())
        } else {
            self.activations.iter().map(|a| a.parse()).collect()
        }
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
