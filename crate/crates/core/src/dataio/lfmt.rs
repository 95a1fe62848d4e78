//! LFMT v1 binary matrix format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LFMT"
//! 4       4     version, u32 LE (= 1)
//! 8       8     rows, u64 LE
//! 16      8     cols, u64 LE
//! 24      1     dtype (1 = f32, 2 = f64)
//! 25      7     reserved, zero
//! 32      ...   rows·cols values, row-major, little-endian
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{invalid, io_at, LofiError, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"LFMT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 1,
    F64 = 2,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

fn format_err<T>(offset: u64, message: impl Into<String>) -> Result<T> {
    Err(LofiError::Format { offset, message: message.into() })
}

/// Serializes a matrix (always as f64) into LFMT bytes.
pub fn encode(m: &DenseMatrix) -> Result<Vec<u8>> {
    encode_as(m, Dtype::F64)
}

pub fn encode_as(m: &DenseMatrix, dtype: Dtype) -> Result<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 {
        return invalid(format!("refusing to write an empty {}x{} matrix", m.rows(), m.cols()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * dtype.width());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.push(dtype as u8);
    out.extend_from_slice(&[0u8; 7]);
    match dtype {
        Dtype::F64 => m.as_slice().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Dtype::F32 => m.as_slice().iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    Ok(out)
}

/// Parses one LFMT block from the front of `bytes`, returning the matrix and
/// the number of bytes consumed. `base` offsets reported errors.
pub fn decode_prefix(bytes: &[u8], base: u64) -> Result<(DenseMatrix, usize)> {
    if bytes.len() < HEADER_LEN {
        return format_err(base + bytes.len() as u64, "truncated header");
    }
    if &bytes[0..4] != MAGIC {
        return format_err(base, "bad magic");
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return format_err(base + 4, format!("unsupported version {version}"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let dtype = match bytes[24] {
        1 => Dtype::F32,
        2 => Dtype::F64,
        other => return format_err(base + 24, format!("unknown dtype {other}")),
    };
    if bytes[25..32].iter().any(|b| *b != 0) {
        return format_err(base + 25, "reserved bytes must be zero");
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or(LofiError::Format { offset: base + 8, message: "dimensions overflow".into() })?;
    let need = count
        .checked_mul(dtype.width())
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or(LofiError::Format { offset: base + 8, message: "dimensions overflow".into() })?;
    if bytes.len() < need {
        return format_err(base + bytes.len() as u64, format!("truncated payload: expected {need} bytes"));
    }
    let payload = &bytes[HEADER_LEN..need];
    let values: Vec<f64> = match dtype {
        Dtype::F64 => payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        Dtype::F32 => payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
    };
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return format_err(base + (HEADER_LEN + pos * dtype.width()) as u64, "non-finite value");
    }
    Ok((DenseMatrix::new(rows as usize, cols as usize, values)?, need))
}

/// Parses a buffer holding exactly one LFMT block.
pub fn decode(bytes: &[u8]) -> Result<DenseMatrix> {
    let (m, used) = decode_prefix(bytes, 0)?;
    if used != bytes.len() {
        return format_err(used as u64, "trailing bytes after payload");
    }
    Ok(m)
}

pub fn save_lfmt(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(m)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn load_lfmt(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io_at(path))?).read_to_end(&mut bytes)?;
    decode(&bytes)
}
