//! Epileptic EEG recordings stored as one integer sample per line, one
//! recording per file, one directory per set.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::RawDataset;
use crate::error::{Error, Result};

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::from(e).context(dir.display().to_string()))? {
        let path = entry?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!("no recordings in {}", dir.display())));
    }
    Ok(files)
}

fn read_recording(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: format!("not a number: {trimmed:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: "non-finite sample".into(),
            });
        }
        samples.push(value);
    }
    Ok(samples)
}

/// Splits every recording of set B (label 0) and set E (label 1) into
/// non-overlapping windows of `window` samples. Samples are divided by the
/// standard deviation of all samples of both sets, then by `√window`.
pub fn read_eeg(dir_b: &Path, dir_e: &Path, window: usize) -> Result<RawDataset> {
    if window == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    let mut recordings = Vec::new();
    for (label, dir) in [(0usize, dir_b), (1, dir_e)] {
        for file in sorted_files(dir)? {
            let samples = read_recording(&file)?;
            if samples.len() < window {
                return Err(Error::Parse {
                    path: file.display().to_string(),
                    line: samples.len(),
                    message: format!("recording has {} samples, fewer than one window of {window}", samples.len()),
                });
            }
            recordings.push((label, samples));
        }
    }
    let count: usize = recordings.iter().map(|(_, s)| s.len()).sum();
    let mean = recordings.iter().flat_map(|(_, s)| s.iter()).sum::<f64>() / count as f64;
    let var = recordings.iter().flat_map(|(_, s)| s.iter()).map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::Numerical("EEG samples have zero standard deviation".into()));
    }
    let scale = 1.0 / (std * (window as f64).sqrt());
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    for (label, samples) in &recordings {
        for chunk in samples.chunks_exact(window) {
            columns.push(chunk.iter().map(|v| v * scale).collect::<Vec<_>>());
            labels.push(*label);
        }
    }
    let mut vectors = DMatrix::zeros(window, columns.len());
    for (c, col) in columns.iter().enumerate() {
        vectors.column_mut(c).copy_from_slice(col);
    }
    Ok(RawDataset {
        vectors,
        labels,
        provenance: format!(
            "eeg[B={}, E={}] window={window} recipe=sample/std/sqrt(window) std={std}",
            dir_b.display(),
            dir_e.display()
        ),
    })
}

fn first_dir(root: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| root.join(n)).find(|p| p.is_dir())
}

/// Loads sets B and E from `root` (or `root/eeg`). Set B may be stored in a
/// directory named `B` or `O`, set E in `E` or `S`.
pub fn load_eeg(root: &Path, window: usize) -> Result<RawDataset> {
    let dir = if root.join("eeg").is_dir() { root.join("eeg") } else { root.to_path_buf() };
    let b = first_dir(&dir, &["B", "O", "b", "o"]);
    let e = first_dir(&dir, &["E", "S", "e", "s"]);
    match (b, e) {
        (Some(b), Some(e)) => read_eeg(&b, &e, window),
        _ => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("EEG sets B and E not found in {}", dir.display()),
        ))),
    }
}
