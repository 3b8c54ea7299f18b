//! MNIST IDX files: big-endian `u32` header fields followed by raw bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::RawDataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: "truncated header".into(),
        })
}

struct Images<'a> {
    count: usize,
    pixels: usize,
    data: &'a [u8],
}

fn parse_images(bytes: &[u8]) -> Result<Images<'_>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let pixels = rows * cols;
    let needed = 16 + count * pixels;
    if bytes.len() < needed {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated image data: {} bytes, expected {needed}", bytes.len()),
        });
    }
    Ok(Images {
        count,
        pixels,
        data: &bytes[16..needed],
    })
}

fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated label data: {} bytes, expected {needed}", bytes.len()),
        });
    }
    Ok(&bytes[8..needed])
}

/// Decodes image/label IDX pairs, keeps the digits in `keep` (all digits if
/// empty) and relabels them `0..K` in ascending digit order. Pixels are
/// scaled to `[0, 1]`, flattened row-major, then divided by `√p`.
pub fn parse_idx_pairs(pairs: &[(&[u8], &[u8])], keep: &[u8]) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let mut selected: Vec<(Vec<f64>, u8)> = Vec::new();
    let mut width = None;
    for (image_bytes, label_bytes) in pairs {
        let images = parse_images(image_bytes)?;
        let labels = parse_labels(label_bytes)?;
        if labels.len() != images.count {
            return Err(Error::Format {
                offset: 4,
                message: format!("{} images but {} labels", images.count, labels.len()),
            });
        }
        if *width.get_or_insert(images.pixels) != images.pixels {
            return Err(Error::Format {
                offset: 8,
                message: "image files have different dimensions".into(),
            });
        }
        let scale = 1.0 / (255.0 * (images.pixels as f64).sqrt());
        for (i, &label) in labels.iter().enumerate() {
            if keep.is_empty() || keep.contains(&label) {
                let raw = &images.data[i * images.pixels..(i + 1) * images.pixels];
                selected.push((raw.iter().map(|&b| b as f64 * scale).collect(), label));
            }
        }
    }
    let p = width.unwrap_or(0);
    let digits: BTreeMap<u8, usize> = {
        let mut d: Vec<u8> = selected.iter().map(|(_, l)| *l).collect();
        d.sort_unstable();
        d.dedup();
        d.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };
    let mut vectors = DMatrix::zeros(p, selected.len());
    let mut labels = Vec::with_capacity(selected.len());
    for (c, (v, l)) in selected.into_iter().enumerate() {
        vectors.column_mut(c).copy_from_slice(&v);
        labels.push(digits[&l]);
    }
    Ok((vectors, labels))
}

pub fn read_idx(images_path: &Path, labels_path: &Path, keep: &[u8]) -> Result<RawDataset> {
    read_idx_pairs(&[(images_path.to_path_buf(), labels_path.to_path_buf())], keep)
}

pub fn read_idx_pairs(paths: &[(PathBuf, PathBuf)], keep: &[u8]) -> Result<RawDataset> {
    let mut buffers = Vec::with_capacity(paths.len());
    for (img, lab) in paths {
        let ib = std::fs::read(img).map_err(|e| Error::from(e).context(img.display().to_string()))?;
        let lb = std::fs::read(lab).map_err(|e| Error::from(e).context(lab.display().to_string()))?;
        buffers.push((ib, lb));
    }
    let slices: Vec<(&[u8], &[u8])> = buffers.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
    let (vectors, labels) = parse_idx_pairs(&slices, keep).map_err(|e| {
        let names: Vec<String> = paths.iter().map(|(i, _)| i.display().to_string()).collect();
        e.context(names.join(", "))
    })?;
    let files: Vec<String> = paths
        .iter()
        .flat_map(|(i, l)| [i.display().to_string(), l.display().to_string()])
        .collect();
    Ok(RawDataset {
        vectors,
        labels,
        provenance: format!("idx[{}] digits={keep:?} recipe=pixel/255/sqrt(p)", files.join(",")),
    })
}

fn find_file(dir: &Path, candidates: &[&str]) -> Option<PathBuf> {
    candidates.iter().map(|c| dir.join(c)).find(|p| p.is_file())
}

/// Loads the MNIST training and test sets found under `root` (or
/// `root/mnist`), restricted to `keep`.
pub fn load_mnist(root: &Path, keep: &[u8]) -> Result<RawDataset> {
    let dir = if root.join("mnist").is_dir() { root.join("mnist") } else { root.to_path_buf() };
    let mut pairs = Vec::new();
    for prefix in ["train", "t10k"] {
        let images = find_file(&dir, &[&format!("{prefix}-images-idx3-ubyte"), &format!("{prefix}-images.idx3-ubyte")]);
        let labels = find_file(&dir, &[&format!("{prefix}-labels-idx1-ubyte"), &format!("{prefix}-labels.idx1-ubyte")]);
        if let (Some(i), Some(l)) = (images, labels) {
            pairs.push((i, l));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no MNIST IDX files in {}", dir.display()),
        )));
    }
    read_idx_pairs(&pairs, keep)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn images_bytes(rows: u32, cols: u32, images: &[Vec<u8>]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(IMAGES_MAGIC.to_be_bytes());
        out.extend((images.len() as u32).to_be_bytes());
        out.extend(rows.to_be_bytes());
        out.extend(cols.to_be_bytes());
        for img in images {
            out.extend(img);
        }
        out
    }

    pub fn labels_bytes(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(LABELS_MAGIC.to_be_bytes());
        out.extend((labels.len() as u32).to_be_bytes());
        out.extend(labels);
        out
    }

    #[test]
    fn single_white_image() {
        let img = images_bytes(2, 2, &[vec![255; 4]]);
        let lab = labels_bytes(&[6]);
        let (v, l) = parse_idx_pairs(&[(&img, &lab)], &[6, 8]).unwrap();
        assert_eq!(v.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(l, vec![0]);
    }

    #[test]
    fn filters_and_relabels() {
        let imgs: Vec<Vec<u8>> = (0..5).map(|i| vec![i * 10, 0, 0, 0]).collect();
        let img = images_bytes(2, 2, &imgs);
        let lab = labels_bytes(&[8, 1, 6, 8, 3]);
        let (v, l) = parse_idx_pairs(&[(&img, &lab)], &[6, 8]).unwrap();
        assert_eq!(l, vec![1, 0, 1]);
        assert!((v[(0, 1)] - 20.0 / 255.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn row_major_flattening() {
        let img = images_bytes(2, 3, &[vec![1, 2, 3, 4, 5, 6]]);
        let lab = labels_bytes(&[0]);
        let (v, _) = parse_idx_pairs(&[(&img, &lab)], &[]).unwrap();
        let scale = 255.0 * 6f64.sqrt();
        let got: Vec<f64> = v.iter().map(|x| (x * scale).round()).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn format_errors() {
        let img = images_bytes(2, 2, &[vec![0; 4]]);
        let lab = labels_bytes(&[1]);
        let mut bad = img.clone();
        bad[3] = 0x01;
        assert!(matches!(parse_idx_pairs(&[(&bad, &lab)], &[]), Err(Error::Format { offset: 0, .. })));
        let truncated = &img[..img.len() - 1];
        assert!(matches!(parse_idx_pairs(&[(truncated, &lab)], &[]), Err(Error::Format { .. })));
        assert!(parse_idx_pairs(&[(&img[..6], &lab)], &[]).is_err());
        let two = labels_bytes(&[1, 2]);
        assert!(parse_idx_pairs(&[(&img, &two)], &[]).is_err());
        assert!(parse_idx_pairs(&[(&lab, &img)], &[]).is_err());
    }

    #[test]
    fn reads_files_and_concatenates() {
        let dir = tempfile::tempdir().unwrap();
        for (prefix, labels) in [("train", vec![6u8, 8]), ("t10k", vec![8u8])] {
            let imgs: Vec<Vec<u8>> = labels.iter().map(|&l| vec![l; 4]).collect();
            std::fs::write(dir.path().join(format!("{prefix}-images-idx3-ubyte")), images_bytes(2, 2, &imgs)).unwrap();
            std::fs::write(dir.path().join(format!("{prefix}-labels-idx1-ubyte")), labels_bytes(&labels)).unwrap();
        }
        let data = load_mnist(dir.path(), &[6, 8]).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.labels, vec![0, 1, 1]);
        let again = load_mnist(dir.path(), &[6, 8]).unwrap();
        assert_eq!(data, again);
        assert!(load_mnist(&dir.path().join("missing"), &[6]).is_err());
    }
}
