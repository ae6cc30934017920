//! IDX binary format for MNIST-style image and label files.
//!
//! Layout, bit-exact: a 4-byte big-endian magic (2051 for images, 2049 for
//! labels), one 4-byte big-endian size per dimension (3 for images: count,
//! rows, cols; 1 for labels: count), then a row-major payload of unsigned
//! bytes. Gzip decompression is the caller's job; this module consumes raw
//! bytes only.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Magic for image files (3 dimensions of u8).
pub const IMAGE_MAGIC: u32 = 2051;
/// Magic for label files (1 dimension of u8).
pub const LABEL_MAGIC: u32 = 2049;

/// Raw image tensor exactly as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, row-major.
    pub pixels: Vec<u8>,
}

impl RawImages {
    /// Serialize back to IDX bytes. Inverse of [`parse_idx_images`].
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.count as u32).to_be_bytes());
        out.extend_from_slice(&(self.rows as u32).to_be_bytes());
        out.extend_from_slice(&(self.cols as u32).to_be_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Normalized feature matrix plus labels, ready for training.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `count x 784`, each entry `pixel / 255` in `[0, 1]`.
    pub features: Array2<f64>,
    /// One class index per row, each in `[0, 9]`.
    pub labels: Vec<u8>,
    pub name: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Split off the last `n` rows (used for validation holdout).
    pub fn split_tail(&self, n: usize) -> Result<(Dataset, Dataset)> {
        if n > self.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot split {} rows off a dataset of {}",
                n,
                self.len()
            )));
        }
        let head = self.len() - n;
        let front = Dataset {
            features: self.features.slice(ndarray::s![..head, ..]).to_owned(),
            labels: self.labels[..head].to_vec(),
            name: self.name.clone(),
        };
        let back = Dataset {
            features: self.features.slice(ndarray::s![head.., ..]).to_owned(),
            labels: self.labels[head..].to_vec(),
            name: format!("{}-holdout", self.name),
        };
        Ok((front, back))
    }

    /// Copy of the first `n` rows (or all rows when `n` exceeds the length).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            features: self.features.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            name: self.name.clone(),
        }
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset
        .checked_add(4)
        .ok_or_else(|| Error::DimensionOverflow(format!("header offset {offset} overflows")))?;
    if bytes.len() < end {
        return Err(Error::Truncated {
            offset,
            needed: 4,
            found: bytes.len().saturating_sub(offset),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an IDX image file (magic 2051).
pub fn parse_idx_images(bytes: &[u8]) -> Result<RawImages> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;

    let payload = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or_else(|| {
            Error::DimensionOverflow(format!("{count} x {rows} x {cols} overflows usize"))
        })?;
    let body = &bytes[16..];
    if body.len() < payload {
        return Err(Error::Truncated {
            offset: 16,
            needed: payload,
            found: body.len(),
        });
    }
    Ok(RawImages {
        count,
        rows,
        cols,
        pixels: body[..payload].to_vec(),
    })
}

/// Parse an IDX label file (magic 2049) with `classes` permitted classes.
pub fn parse_idx_labels(bytes: &[u8], classes: usize) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Truncated {
            offset: 8,
            needed: count,
            found: body.len(),
        });
    }
    let labels = body[..count].to_vec();
    for (index, &label) in labels.iter().enumerate() {
        if label as usize >= classes {
            return Err(Error::LabelOutOfRange {
                label: label as usize,
                index,
                classes,
            });
        }
    }
    Ok(labels)
}

/// Serialize labels back to IDX bytes. Inverse of [`parse_idx_labels`].
pub fn labels_to_idx_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Pair images with labels and normalize pixels to `[0, 1]` by `x / 255`.
///
/// Order is preserved: feature row `i` is pixel block `i` and label `i`.
pub fn to_dataset(images: &RawImages, labels: &[u8], name: &str) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    let width = images.rows * images.cols;
    if width != 784 {
        return Err(Error::ShapeMismatch(format!(
            "expected 28x28 images (784 features), got {}x{}",
            images.rows, images.cols
        )));
    }
    let features = Array2::from_shape_vec(
        (images.count, width),
        images
            .pixels
            .iter()
            .map(|&p| f64::from(p) / 255.0)
            .collect(),
    )
    .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(Dataset {
        features,
        labels: labels.to_vec(),
        name: name.to_string(),
    })
}
