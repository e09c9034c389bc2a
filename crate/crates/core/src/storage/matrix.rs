use std::path::Path;

use crate::{Error, Matrix, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"BARYMAT1";
pub const MATRIX_VERSION: u16 = 1;
const HEADER_LEN: usize = 8 + 2 + 8 + 8;

/// Serialises `m` as a `BARYMAT1` byte string.
pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for r in 0..rows {
        for c in 0..cols {
            out.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    out
}

/// Parses a `BARYMAT1` byte string; `path` is only used in errors.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < MATRIX_MAGIC.len() || &bytes[..8] != MATRIX_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != MATRIX_VERSION {
        return Err(Error::VersionUnsupported {
            path: path.into(),
            version,
        });
    }
    let rows = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .unwrap_or(u64::MAX);
    if expected != payload.len() as u64 {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            actual: payload.len() as u64,
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|chunk| f64::from_le_bytes(chunk.try_into().unwrap()))
        .collect();
    Ok(Matrix::from_row_slice(rows as usize, cols as usize, &values))
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}
