//! Binary parameter format.
//!
//! ```text
//! magic   8 bytes   "PNETPARM"
//! version u32 LE    currently 1
//! count   u32 LE    number of tensors
//! count x {
//!   name_len u32 LE, name (UTF-8)
//!   rank     u32 LE, rank x u64 LE dims
//!   values   product(dims) x f64 LE, row-major
//! }
//! ```
//! Tensors are written in name order.

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PNETPARM";
pub const VERSION: u32 = 1;

pub fn encode_params(params: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.num_values() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    file: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.file, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses the format written by [`encode_params`]. `file` names the source in
/// error messages.
pub fn decode_params(buf: &[u8], file: &str) -> Result<ParamStore> {
    let mut r = Reader { buf, pos: 0, file };
    if r.take(8)? != MAGIC {
        return Err(Error::format(file, "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(file, format!("unsupported format version {version}")));
    }
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format(file, "parameter name is not UTF-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format(file, "tensor size overflows"))?;
        let bytes = r.take(n.checked_mul(8).ok_or_else(|| Error::format(file, "tensor size overflows"))?)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store
            .insert(name, Tensor::new(shape, data)?)
            .map_err(|e| Error::format(file, e.to_string()))?;
    }
    if r.pos != buf.len() {
        return Err(Error::format(file, "trailing bytes after last tensor"));
    }
    Ok(store)
}
