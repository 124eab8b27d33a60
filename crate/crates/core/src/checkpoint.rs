//! Binary checkpoint format for model parameters.
//!
//! Layout (all integers little-endian after the magic):
//!
//! ```text
//! "DBCK"                     4-byte magic
//! version    u32             currently 1
//! slots      u32             number of parameter slots
//! per slot, for weights then bias:
//!   ndim     u32
//!   dims     ndim × u32
//!   data     product(dims) × f64 (little-endian bits)
//! ```
//!
//! Save → load → save reproduces the file byte for byte: f64 payloads are
//! stored as raw bits, never re-parsed through text.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::ParamSlot;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"DBCK";
const VERSION: u32 = 1;

/// Serialize the weights and biases of `slots` to `path`.
pub fn save_checkpoint(path: &Path, slots: &[ParamSlot]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(slots.len() as u32).to_le_bytes());
    for slot in slots {
        for tensor in [&slot.weights, &slot.bias] {
            buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
            for &dim in tensor.shape() {
                buf.extend_from_slice(&(dim as u32).to_le_bytes());
            }
            for &v in tensor.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Load a checkpoint into an existing model's slots. Shapes must match the
/// slots exactly; gradients, velocities, and trainable flags are untouched.
pub fn load_checkpoint_into(path: &Path, slots: &mut [ParamSlot]) -> Result<()> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };

    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(fail(
            path,
            format!("bad magic {magic:02x?}, expected {MAGIC:02x?}"),
        ));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(fail(
            path,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let count = r.u32()? as usize;
    if count != slots.len() {
        return Err(fail(
            path,
            format!("checkpoint has {count} slots, model has {}", slots.len()),
        ));
    }

    for slot in slots.iter_mut() {
        for which in ["weights", "bias"] {
            let ndim = r.u32()? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32()? as usize);
            }
            let expected = match which {
                "weights" => slot.weights.shape(),
                _ => slot.bias.shape(),
            };
            if dims != expected {
                return Err(fail(
                    path,
                    format!(
                        "slot {:?} {which} shape {dims:?} does not match model shape {expected:?}",
                        slot.name
                    ),
                ));
            }
            let len: usize = dims.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
            }
            let tensor = Tensor::from_vec(&dims, data).expect("len == product(dims)");
            match which {
                "weights" => slot.weights = tensor,
                _ => slot.bias = tensor,
            }
        }
    }

    if r.pos != bytes.len() {
        return Err(fail(
            path,
            format!("{} trailing bytes after payload", bytes.len() - r.pos),
        ));
    }
    Ok(())
}

fn fail(path: &Path, detail: String) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        detail,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(fail(
                self.path,
                format!(
                    "truncated: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
