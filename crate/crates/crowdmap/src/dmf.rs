//! DMF1 density-map files.
//!
//! Layout (all little-endian):
//!
//! | offset | size      | content                         |
//! |--------|-----------|---------------------------------|
//! | 0      | 4         | magic `DMF1`                    |
//! | 4      | 4         | width, `u32`                    |
//! | 8      | 4         | height, `u32`                   |
//! | 12     | 4·w·h     | `f32` values, row-major (row=y) |
//!
//! Values are held as `f64` in memory and narrowed to `f32` on write.

use std::fs;
use std::path::Path;

use crowdmap_core::DensityMap;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DMF1";
pub const HEADER_LEN: usize = 12;

pub fn encode(map: &DensityMap) -> Result<Vec<u8>> {
    let w = u32::try_from(map.width()).map_err(|_| Error::format(4, "width exceeds u32"))?;
    let h = u32::try_from(map.height()).map_err(|_| Error::format(8, "height exceeds u32"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for &v in map.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<DensityMap> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected DMF1"));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(4, "width * height overflows"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < payload {
        let offset = (HEADER_LEN + body.len() - body.len() % 4) as u64;
        return Err(Error::format(
            offset,
            format!("truncated payload: {} of {} bytes", body.len(), payload),
        ));
    }
    if body.len() > payload {
        return Err(Error::format((HEADER_LEN + payload) as u64, "trailing bytes after payload"));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::format(
            (HEADER_LEN + 4 * i) as u64,
            "density values must be finite and non-negative",
        ));
    }
    Ok(DensityMap::new(w, h, values)?)
}

pub fn write_density_map(map: &DensityMap, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(map)?;
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path, e))
}

pub fn read_density_map(path: impl AsRef<Path>) -> Result<DensityMap> {
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    decode(&bytes)
}
