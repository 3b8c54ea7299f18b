//! Ingestion of real data sets, configuration files and artifact emission.

pub mod config;
pub mod csv;
pub mod eeg;
pub mod experiment;
pub mod idx;
pub mod svg;

use nalgebra::DMatrix;

pub use eeg::{load_eeg, read_eeg};
pub use idx::{load_mnist, read_idx};

/// Preprocessed real observations.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    /// `p × N`, one observation per column.
    pub vectors: DMatrix<f64>,
    /// 0-based class indices.
    pub labels: Vec<usize>,
    /// Source files and preprocessing recipe.
    pub provenance: String,
}

impl RawDataset {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Mean squared norm of the observations.
    pub fn mean_squared_norm(&self) -> f64 {
        self.vectors.norm_squared() / self.len().max(1) as f64
    }
}

/// Dataset root from `RFSPECTRUM_DATA_DIR`.
pub fn data_dir_from_env() -> Option<std::path::PathBuf> {
    std::env::var_os("RFSPECTRUM_DATA_DIR").map(Into::into)
}
