//! Binary model checkpoints.
//!
//! Layout (all integers little-endian, all floats IEEE-754 binary64):
//!
//! ```text
//! magic          8 bytes  "NNCKPT01"
//! size count     u32      number of layer sizes S (network has S-1 weight layers)
//! layer sizes    S × u32
//! init seed      u64
//! mode           u32 byte length + UTF-8   training mode
//! loss           u32 byte length + UTF-8   loss kind
//! optimizer      u32 byte length + UTF-8   optimizer name
//! weights        per layer, n_out × n_in f64, row-major
//! biases         per layer, n_out f64
//! ```
//!
//! Serialization is bit-exact: reading a checkpoint reproduces the f64
//! parameters identically, and serializing the same model twice yields the
//! same bytes.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::network::MlpParams;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NNCKPT01";

const MAX_LAYERS: usize = 64;
const MAX_WIDTH: usize = 1_000_000;
const MAX_META_LEN: usize = 4096;

/// Provenance recorded alongside the parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub init_seed: u64,
    pub mode: String,
    pub loss: String,
    pub optimizer: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: MlpParams,
    pub meta: CheckpointMeta,
}

pub fn checkpoint_bytes(params: &MlpParams, meta: &CheckpointMeta) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(params.layer_sizes.len() as u32).to_le_bytes());
    for &n in &params.layer_sizes {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&meta.init_seed.to_le_bytes());
    for s in [&meta.mode, &meta.loss, &meta.optimizer] {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    for w in &params.weights {
        for &v in w.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for b in &params.biases {
        for &v in b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::CheckpointFormat(format!(
                "file ends inside {what}: need {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        if len > MAX_META_LEN {
            return Err(Error::CheckpointFormat(format!(
                "{what} string of {len} bytes exceeds the {MAX_META_LEN} limit"
            )));
        }
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::CheckpointFormat(format!("{what} is not valid UTF-8")))
    }

    fn f64_block(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(count * 8, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(8, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointFormat(format!(
            "bad magic {:?}, expected {:?}",
            &magic[..magic.len().min(8)],
            CHECKPOINT_MAGIC
        )));
    }
    let count = r.u32("layer size count")? as usize;
    if !(2..=MAX_LAYERS).contains(&count) {
        return Err(Error::CheckpointFormat(format!(
            "layer size count {count} outside 2..={MAX_LAYERS}"
        )));
    }
    let mut layer_sizes = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.u32("layer sizes")? as usize;
        if n == 0 || n > MAX_WIDTH {
            return Err(Error::CheckpointFormat(format!(
                "layer width {n} outside 1..={MAX_WIDTH}"
            )));
        }
        layer_sizes.push(n);
    }
    let init_seed = r.u64("init seed")?;
    let mode = r.string("mode")?;
    let loss = r.string("loss")?;
    let optimizer = r.string("optimizer")?;
    let mut weights = Vec::with_capacity(count - 1);
    for l in 1..count {
        let (nout, nin) = (layer_sizes[l], layer_sizes[l - 1]);
        let total = nout.checked_mul(nin).ok_or_else(|| {
            Error::CheckpointFormat(format!("weight matrix {nout}x{nin} overflows"))
        })?;
        let data = r.f64_block(total, "weights")?;
        weights.push(
            Array2::from_shape_vec((nout, nin), data)
                .map_err(|e| Error::CheckpointFormat(e.to_string()))?,
        );
    }
    let mut biases = Vec::with_capacity(count - 1);
    for &width in &layer_sizes[1..] {
        biases.push(Array1::from_vec(r.f64_block(width, "biases")?));
    }
    if r.pos != bytes.len() {
        return Err(Error::CheckpointFormat(format!(
            "{} trailing bytes after the parameter block",
            bytes.len() - r.pos
        )));
    }
    let params = MlpParams {
        layer_sizes,
        weights,
        biases,
    };
    Ok(Checkpoint {
        params,
        meta: CheckpointMeta {
            init_seed,
            mode,
            loss,
            optimizer,
        },
    })
}

pub fn write_checkpoint(path: &Path, params: &MlpParams, meta: &CheckpointMeta) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(params, meta))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (MlpParams, CheckpointMeta) {
        let params = MlpParams::glorot(&[5, 4, 3], 99).unwrap();
        let meta = CheckpointMeta {
            init_seed: 99,
            mode: "reg-uncorrelated".into(),
            loss: "softmax-ce".into(),
            optimizer: "adam".into(),
        };
        (params, meta)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (params, meta) = sample();
        let bytes = checkpoint_bytes(&params, &meta);
        let loaded = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.params, params);
        assert_eq!(loaded.meta, meta);
    }

    #[test]
    fn serialization_is_deterministic() {
        let (params, meta) = sample();
        assert_eq!(
            checkpoint_bytes(&params, &meta),
            checkpoint_bytes(&params, &meta)
        );
    }

    #[test]
    fn bad_magic_is_rejected() {
        let (params, meta) = sample();
        let mut bytes = checkpoint_bytes(&params, &meta);
        bytes[0] = b'X';
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(Error::CheckpointFormat(_))
        ));
    }

    #[test]
    fn truncation_is_reported() {
        let (params, meta) = sample();
        let bytes = checkpoint_bytes(&params, &meta);
        for cut in [4, 11, 40, bytes.len() - 1] {
            let err = checkpoint_from_bytes(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(err, Error::CheckpointFormat(_)),
                "cut at {cut} gave {err:?}"
            );
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let (params, meta) = sample();
        let mut bytes = checkpoint_bytes(&params, &meta);
        bytes.push(0);
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(Error::CheckpointFormat(_))
        ));
    }

    #[test]
    fn absurd_headers_are_rejected() {
        let mut bytes = CHECKPOINT_MAGIC.to_vec();
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(Error::CheckpointFormat(_))
        ));
        let mut bytes = CHECKPOINT_MAGIC.to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        assert!(matches!(
            checkpoint_from_bytes(&bytes),
            Err(Error::CheckpointFormat(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (params, meta) = sample();
        write_checkpoint(&path, &params, &meta).unwrap();
        let loaded = read_checkpoint(&path).unwrap();
        assert_eq!(loaded.params, params);
        assert_eq!(loaded.meta.optimizer, "adam");
    }
}
