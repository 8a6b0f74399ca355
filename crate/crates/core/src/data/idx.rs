//! IDX files as used by MNIST and Fashion-MNIST: a big-endian magic number,
//! big-endian `u32` dimensions, then raw unsigned bytes.

use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, "truncated header"))
}

fn check_magic(bytes: &[u8], want: u32, path: &Path) -> Result<()> {
    let got = read_u32(bytes, 0, path)?;
    if got != want {
        return Err(Error::format(path, format!("bad magic 0x{got:08x}, expected 0x{want:08x}")));
    }
    Ok(())
}

/// Images as an `n × (rows·cols)` matrix scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<Tensor> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let n = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    let dim = rows * cols;
    let body = &bytes[16..];
    if body.len() < n * dim {
        return Err(Error::format(path, format!("truncated: need {} pixel bytes, have {}", n * dim, body.len())));
    }
    if n == 0 || dim == 0 {
        return Err(Error::format(path, "empty image file"));
    }
    let data = body[..n * dim].iter().map(|&b| b as f64 / 255.0).collect();
    Tensor::matrix(n, dim, data)
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let n = read_u32(bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::format(path, format!("truncated: need {n} label bytes, have {}", body.len())));
    }
    Ok(body[..n].iter().map(|&b| b as usize).collect())
}

/// Loads an image/label file pair. Class names are the label values as
/// decimal strings, `0..=max_label`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lab = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let features = parse_images(&img, images_path)?;
    let labels = parse_labels(&lab, labels_path)?;
    if features.rows() != labels.len() {
        return Err(Error::format(
            labels_path,
            format!("{} labels for {} images", labels.len(), features.rows()),
        ));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let names = (0..n_classes).map(|c| c.to_string()).collect();
    Dataset::new(features, labels, names, images_path.display().to_string())
}

/// Encodes an image file; used for fixtures and subsets.
pub fn encode_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_image_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        std::fs::write(&ip, encode_images(2, 2, 2, &[0, 1, 2, 255, 10, 20, 30, 40])).unwrap();
        std::fs::write(&lp, encode_labels(&[3, 1])).unwrap();
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.features.shape(), &[2, 4]);
        assert_eq!(ds.features.row(0), &[0.0, 1.0 / 255.0, 2.0 / 255.0, 1.0]);
        assert_eq!(ds.features.row(1), &[10.0 / 255.0, 20.0 / 255.0, 30.0 / 255.0, 40.0 / 255.0]);
        assert_eq!(ds.labels, vec![3, 1]);
        assert_eq!(ds.num_classes(), 4);
    }

    #[test]
    fn wrong_magic_truncation_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        std::fs::write(&ip, encode_images(2, 2, 2, &[0; 8])).unwrap();

        std::fs::write(&lp, encode_images(2, 1, 1, &[0, 0])).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));

        std::fs::write(&lp, encode_labels(&[1, 2, 3])).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));

        std::fs::write(&ip, &encode_images(2, 2, 2, &[0; 8])[..20]).unwrap();
        std::fs::write(&lp, encode_labels(&[1, 2])).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));

        assert!(matches!(load_idx(&dir.path().join("missing"), &lp), Err(Error::Io { .. })));
    }
}
