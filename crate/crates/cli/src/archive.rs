//! Dataset archive format.
//!
//! `ingest` validates an IDX pair once and persists it as a single
//! checksummed file so later commands can load it without re-validating
//! external input. Layout, all integers little-endian:
//!
//! ```text
//! magic   8  b"NNDSET01"
//! name    u32 length + that many UTF-8 bytes
//! count   u32   number of samples
//! rows    u32   image height
//! cols    u32   image width
//! pixels  count*rows*cols bytes, row-major per image
//! labels  count bytes
//! sha256  32 bytes over everything above
//! ```

use std::io::Read;
use std::path::Path;

use noisenet_core::idx::{self, RawImages};
use noisenet_core::{Dataset, Error, Result};
use sha2::{Digest, Sha256};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"NNDSET01";
const MAX_NAME: usize = 4096;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serialize validated images and labels. Counts must already agree.
pub fn archive_bytes(name: &str, images: &RawImages, labels: &[u8]) -> Result<Vec<u8>> {
    if images.count != labels.len() {
        return Err(Error::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    let mut out = Vec::with_capacity(images.pixels.len() + labels.len() + 64);
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    for dim in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out.extend_from_slice(labels);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.offset.checked_add(n).ok_or_else(|| {
            Error::CheckpointFormat(format!("archive length overflow reading {what}"))
        })?;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                offset: self.offset,
                needed: n,
                found: self.bytes.len() - self.offset,
            });
        }
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Parse and checksum-verify an archive, returning (name, images, labels).
pub fn parse_archive(bytes: &[u8]) -> Result<(String, RawImages, Vec<u8>)> {
    if bytes.len() < 40 {
        return Err(Error::Truncated {
            offset: 0,
            needed: 40,
            found: bytes.len(),
        });
    }
    let (body, stored) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored {
        return Err(Error::CheckpointFormat(
            "archive checksum mismatch: file is corrupt".into(),
        ));
    }
    let mut r = Reader {
        bytes: body,
        offset: 0,
    };
    let magic = r.take(8, "magic")?;
    if magic != ARCHIVE_MAGIC {
        return Err(Error::BadMagic {
            expected: u32::from_be_bytes(ARCHIVE_MAGIC[..4].try_into().unwrap()),
            found: u32::from_be_bytes(magic[..4].try_into().unwrap()),
        });
    }
    let name_len = r.u32("name length")? as usize;
    if name_len > MAX_NAME {
        return Err(Error::CheckpointFormat(format!(
            "archive name length {name_len} exceeds {MAX_NAME}"
        )));
    }
    let name = String::from_utf8(r.take(name_len, "name")?.to_vec())
        .map_err(|_| Error::CheckpointFormat("archive name is not UTF-8".into()))?;
    let count = r.u32("count")? as usize;
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let pixel_count = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::DimensionOverflow(format!("{count}x{rows}x{cols}")))?;
    let pixels = r.take(pixel_count, "pixels")?.to_vec();
    let labels = r.take(count, "labels")?.to_vec();
    if r.offset != body.len() {
        return Err(Error::CheckpointFormat(format!(
            "{} trailing bytes after archive payload",
            body.len() - r.offset
        )));
    }
    Ok((
        name,
        RawImages {
            count,
            rows,
            cols,
            pixels,
        },
        labels,
    ))
}

/// Load an archive from disk into a training-ready dataset.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let (name, images, labels) = parse_archive(&bytes)?;
    idx::to_dataset(&images, &labels, &name)
}

/// True if the bytes start with the gzip magic.
pub fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

/// Read a file, transparently decompressing gzip.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if !is_gzip(&raw) {
        return Ok(raw);
    }
    let mut out = Vec::new();
    flate2::read::MultiGzDecoder::new(&raw[..]).read_to_end(&mut out)?;
    Ok(out)
}
