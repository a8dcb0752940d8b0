//! The `BSLB1` array file: 5-byte magic, a `u8` rank, `rank` little-endian
//! `u64` dimensions, then the row-major `f64` payload in little-endian order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"BSLB1";

/// Serializes an array; a rank-0 array holds exactly one value.
pub fn encode(dims: &[usize], values: &[f64]) -> Result<Vec<u8>> {
    if dims.len() > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!("rank {} exceeds 255", dims.len())));
    }
    let count: usize = dims.iter().product();
    if count != values.len() {
        return Err(Error::GridMismatch(format!("{} values for dims {dims:?}", values.len())));
    }
    let mut out = Vec::with_capacity(6 + 8 * dims.len() + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses an array, rejecting a wrong magic, a truncated header and any
/// payload length other than `8 * prod(dims)`.
pub fn decode(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let header_err = |msg: &str, offset: usize| Error::ArrayFormat { msg: msg.to_string(), offset: offset as u64 };
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let offset = bytes.iter().zip(MAGIC).position(|(a, b)| a != b).unwrap_or(bytes.len().min(MAGIC.len()));
        return Err(header_err("bad magic, expected BSLB1", offset));
    }
    let rank = *bytes.get(5).ok_or_else(|| header_err("missing rank byte", 5))? as usize;
    let mut dims = Vec::with_capacity(rank);
    let mut pos = 6;
    for _ in 0..rank {
        let raw = bytes.get(pos..pos + 8).ok_or_else(|| header_err("truncated dimension", pos))?;
        let d = u64::from_le_bytes(raw.try_into().unwrap());
        dims.push(usize::try_from(d).map_err(|_| header_err("dimension too large", pos))?);
        pos += 8;
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| header_err("dimensions overflow", 6))?;
    let payload = &bytes[pos..];
    if payload.len() < count {
        return Err(Error::PayloadShort((count - payload.len()) as u64));
    }
    if payload.len() > count {
        return Err(header_err("trailing bytes after payload", pos + count));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((dims, values))
}

pub fn save_array(path: &Path, dims: &[usize], values: &[f64]) -> Result<()> {
    fs::write(path, encode(dims, values)?)?;
    Ok(())
}

pub fn load_array(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_stores_one_value() {
        let bytes = encode(&[], &[2.5]).unwrap();
        assert_eq!(bytes.len(), 6 + 8);
        assert_eq!(decode(&bytes).unwrap(), (vec![], vec![2.5]));
    }

    #[test]
    fn truncation_reports_missing_bytes() {
        let mut bytes = encode(&[2, 3], &[1.0; 6]).unwrap();
        bytes.truncate(bytes.len() - 11);
        assert_eq!(decode(&bytes).unwrap_err().to_string(), "array file: payload short by 11 bytes");
    }

    #[test]
    fn corrupt_header_names_the_offset() {
        let good = encode(&[4], &[0.0; 4]).unwrap();
        let mut bytes = good.clone();
        bytes[3] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::ArrayFormat { offset: 3, .. })));
        let bytes = good;
        assert!(matches!(decode(&bytes[..9]), Err(Error::ArrayFormat { offset: 6, .. })));
        assert!(matches!(decode(&bytes[..5]), Err(Error::ArrayFormat { offset: 5, .. })));
    }
}
