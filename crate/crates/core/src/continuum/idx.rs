//! IDX binary parsing for the MNIST file family.
//!
//! Images: big-endian magic 2051, count, rows, cols, then unsigned bytes
//! row-major. Labels: magic 2049, count, bytes. Parse errors name the
//! first offending byte offset.

use std::path::Path;

use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::idx(
            bytes.len(),
            format!("truncated header, needed {end} bytes"),
        ));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses an IDX image payload into `[0, 1]`-scaled pixel vectors.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::idx(
            0,
            format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let pixels = rows * cols;
    let expected = 16 + count * pixels;
    if bytes.len() < expected {
        return Err(Error::idx(
            bytes.len(),
            format!(
                "truncated image payload: header promises {count} images of {rows}x{cols} \
                 ({expected} bytes), got {}",
                bytes.len()
            ),
        ));
    }
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * pixels;
        let image: Vec<f64> = bytes[start..start + pixels]
            .iter()
            .map(|&b| f64::from(b) / 255.0)
            .collect();
        images.push(image);
    }
    Ok(images)
}

/// Parses an IDX label payload; labels must be digits 0-9.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::idx(
            0,
            format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::idx(
            bytes.len(),
            format!("truncated label payload: expected {expected} bytes"),
        ));
    }
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let b = bytes[8 + i];
        if b > 9 {
            return Err(Error::idx(8 + i, format!("label {b} out of range 0-9")));
        }
        labels.push(b as usize);
    }
    Ok(labels)
}

/// Labelled samples shared by the IDX and feature-CSV loaders.
#[derive(Debug, Clone)]
pub struct SourceData {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub input_dim: usize,
    pub n_classes: usize,
}

impl SourceData {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::config(format!(
                "image count {} does not match label count {}",
                inputs.len(),
                labels.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::config("empty data source"));
        }
        let input_dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != input_dim) {
            return Err(Error::config("ragged input rows"));
        }
        let n_classes = labels.iter().max().copied().unwrap_or(0) + 1;
        Ok(Self {
            inputs,
            labels,
            input_dim,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Loads and cross-checks an images/labels file pair.
pub fn load_idx_pair(images_path: &Path, labels_path: &Path) -> Result<SourceData> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let images = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    let mut data = SourceData::new(images, labels)?;
    data.n_classes = 10;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_header(count: u32, rows: u32, cols: u32) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        v.extend_from_slice(&count.to_be_bytes());
        v.extend_from_slice(&rows.to_be_bytes());
        v.extend_from_slice(&cols.to_be_bytes());
        v
    }

    #[test]
    fn parses_two_tiny_images() {
        let mut bytes = image_header(2, 2, 2);
        bytes.extend_from_slice(&[0, 255, 128, 64, 10, 20, 30, 40]);
        let images = parse_idx_images(&bytes).unwrap();
        assert_eq!(images.len(), 2);
        assert_eq!(images[0].len(), 4);
        assert_eq!(images[0][0], 0.0);
        assert_eq!(images[0][1], 1.0);
        assert!((images[0][2] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_magic_names_offset_zero() {
        let mut bytes = image_header(1, 1, 1);
        bytes[3] = 0x99;
        bytes.push(0);
        match parse_idx_images(&bytes) {
            Err(Error::Idx { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected idx error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_names_length() {
        let mut bytes = image_header(2, 2, 2);
        bytes.extend_from_slice(&[0, 255, 128]); // 5 bytes short
        match parse_idx_images(&bytes) {
            Err(Error::Idx { offset, .. }) => assert_eq!(offset, bytes.len()),
            other => panic!("expected idx error, got {other:?}"),
        }
    }

    #[test]
    fn parses_labels_and_rejects_out_of_range() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&3u32.to_be_bytes());
        bytes.extend_from_slice(&[0, 9, 5]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![0, 9, 5]);

        let mut bad = bytes.clone();
        bad[9] = 10;
        match parse_idx_labels(&bad) {
            Err(Error::Idx { offset, .. }) => assert_eq!(offset, 9),
            other => panic!("expected idx error, got {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_is_a_validation_error() {
        let images = vec![vec![0.0; 4]; 2];
        let labels = vec![1usize; 3];
        assert!(SourceData::new(images, labels).is_err());
    }
}
