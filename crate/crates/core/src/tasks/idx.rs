//! Big-endian IDX image and label files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

/// Grayscale images `[N, rows, cols]` scaled to `[0, 1]`, with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub images: Tensor,
    pub labels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.images.shape()[1], self.images.shape()[2])
    }

    /// Image `i` as an `[rows, cols]` tensor.
    pub fn image(&self, i: usize) -> Tensor {
        let (r, c) = self.image_shape();
        let n = r * c;
        Tensor::new(vec![r, c], self.images.data()[i * n..(i + 1) * n].to_vec()).expect("image slice")
    }

    /// The first `limit` images (all of them if there are fewer).
    pub fn truncated(&self, limit: usize) -> IdxImages {
        let keep = limit.min(self.len());
        let (r, c) = self.image_shape();
        IdxImages {
            images: Tensor::new(vec![keep, r, c], self.images.data()[..keep * r * c].to_vec()).expect("prefix"),
            labels: self.labels[..keep].to_vec(),
        }
    }
}

fn read_u32(bytes: &[u8], at: usize, field: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(field, "file ends inside the header"))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<Tensor> {
    let magic = read_u32(bytes, 0, "images.magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            "images.magic",
            format!("expected {IMAGE_MAGIC}, found {magic}"),
        ));
    }
    let n = read_u32(bytes, 4, "images.count")? as usize;
    let rows = read_u32(bytes, 8, "images.rows")? as usize;
    let cols = read_u32(bytes, 12, "images.cols")? as usize;
    let body = &bytes[16..];
    let want = n * rows * cols;
    if body.len() != want {
        return Err(Error::format(
            "images.data",
            format!(
                "header declares {n}x{rows}x{cols} = {want} bytes, file has {}",
                body.len()
            ),
        ));
    }
    let data = body.iter().map(|&b| b as Real / 255.0).collect();
    Tensor::new(vec![n, rows, cols], data)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "labels.magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            "labels.magic",
            format!("expected {LABEL_MAGIC}, found {magic}"),
        ));
    }
    let n = read_u32(bytes, 4, "labels.count")? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::format(
            "labels.data",
            format!("header declares {n} labels, file has {}", body.len()),
        ));
    }
    Ok(body.to_vec())
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxImages> {
    let images = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if images.shape()[0] != labels.len() {
        return Err(Error::format(
            "labels.count",
            format!("{} labels for {} images", labels.len(), images.shape()[0]),
        ));
    }
    Ok(IdxImages { images, labels })
}

/// Encodes raw pixel bytes `[n, rows, cols]` as an IDX image file.
pub fn encode_idx_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_image_magic_and_rejects_neighbor() {
        let mut bytes = encode_idx_images(1, 2, 2, &[0, 0, 0, 0]);
        assert!(parse_idx_images(&bytes).is_ok());
        bytes[3] = 4; // 2052
        let err = parse_idx_images(&bytes).unwrap_err().to_string();
        assert!(err.contains("images.magic"), "{err}");
    }

    #[test]
    fn zero_image_and_full_scale() {
        let t = parse_idx_images(&encode_idx_images(2, 28, 28, &[[0u8; 784], [255u8; 784]].concat())).unwrap();
        assert!(t.data()[..784].iter().all(|&v| v == 0.0));
        assert!(t.data()[784..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        std::fs::write(&ip, encode_idx_images(2, 1, 1, &[1, 2])).unwrap();
        std::fs::write(&lp, encode_idx_labels(&[0, 1, 2])).unwrap();
        let err = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("labels.count"), "{err}");
        let bad = encode_idx_labels(&[1]);
        assert!(parse_idx_labels(&bad[..8])
            .unwrap_err()
            .to_string()
            .contains("labels.data"));
    }
}
