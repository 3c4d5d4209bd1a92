//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "NWPCKPT\0"
//! version      u32
//! config       6 × u64  vocab_size, embed_dim, context_len, lstm_units, dense_hidden, seed
//! tensor count u32
//! per tensor:
//!   name length u32, name (UTF-8)
//!   ndim u32, dims ndim × u64
//!   data        prod(dims) × f64, row-major
//! ```
//!
//! Tensors appear in [`TENSOR_NAMES`](super::TENSOR_NAMES) order. LSTM gate
//! matrices are packed input, forget, output, candidate.

use std::io::{Read, Write};
use std::path::Path;

use super::model::{NeuralModel, Parameters, TENSOR_NAMES};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"NWPCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;

fn bad(detail: impl Into<String>) -> Error {
    Error::format("checkpoint", detail)
}

pub fn write_checkpoint<F: Scalar, W: Write>(model: &NeuralModel<F>, mut w: W) -> Result<()> {
    let c = &model.config;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for v in [c.vocab_size, c.embed_dim, c.context_len, c.lstm_units, c.dense_hidden] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&c.seed.to_le_bytes())?;
    let tensors = model.params.tensors();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.name.len() as u32).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for d in &t.shape {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in t.data {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn checkpoint_bytes<F: Scalar>(model: &NeuralModel<F>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf).expect("writing to memory");
    buf
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<F: Scalar, R: Read>(mut r: R) -> Result<NeuralModel<F>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            what: "checkpoint",
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = usize::try_from(read_u64(&mut r)?).map_err(|_| bad("dimension overflow"))?;
    }
    let config = ModelConfig {
        vocab_size: dims[0],
        embed_dim: dims[1],
        context_len: dims[2],
        lstm_units: dims[3],
        dense_hidden: dims[4],
        seed: read_u64(&mut r)?,
    };
    config.validate()?;
    let mut params = Parameters::<F>::zeros(&config);
    let expected: Vec<(&'static str, Vec<usize>)> =
        params.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
    let count = read_u32(&mut r)? as usize;
    if count != TENSOR_NAMES.len() {
        return Err(bad(format!("expected {} tensors, found {count}", TENSOR_NAMES.len())));
    }
    for ((name, shape), slot) in expected.into_iter().zip(params.tensors_mut()) {
        let len = read_u32(&mut r)? as usize;
        if len > 256 {
            return Err(bad("tensor name too long"));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        if buf != name.as_bytes() {
            return Err(bad(format!("expected tensor {name}, found {}", String::from_utf8_lossy(&buf))));
        }
        let ndim = read_u32(&mut r)? as usize;
        let found: Vec<usize> = (0..ndim)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<_>>()?;
        if found != shape {
            return Err(bad(format!("tensor {name} has shape {found:?}, expected {shape:?}")));
        }
        for v in slot.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = F::from_f64_lossy(f64::from_le_bytes(b));
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(NeuralModel { config, params })
}

impl<F: Scalar> NeuralModel<F> {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, checkpoint_bytes(self))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
