//! Binary PGM (P5) rendering of density maps.

use std::fs;
use std::path::Path;

use crowdmap_core::localize::Center;
use crowdmap_core::DensityMap;

use crate::error::{Error, Result};

/// Linear rescale so the peak maps to 255; centers are stamped as 3x3
/// white crosses.
pub fn render(map: &DensityMap, centers: &[Center]) -> Vec<u8> {
    let (w, h) = map.dims();
    let peak = map.max_value();
    let mut pixels: Vec<u8> = map
        .values()
        .iter()
        .map(|&v| {
            if peak > 0.0 {
                (v / peak * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    for c in centers {
        let (cx, cy) = (c.x.round() as i64, c.y.round() as i64);
        for (dx, dy) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                pixels[y as usize * w + x as usize] = 255;
            }
        }
    }
    let mut out = format!("P5\n{} {}\n255\n", w, h).into_bytes();
    out.extend_from_slice(&pixels);
    out
}

pub fn write_pgm(map: &DensityMap, centers: &[Center], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), render(map, centers)).map_err(|e| Error::io(path, e))
}

/// Splits a P5 file into `(width, height, pixels)`.
pub fn parse(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, "truncated PGM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or(""));
    }
    if fields[0] != "P5" {
        return Err(Error::format(0, "bad magic, expected P5"));
    }
    let num = |s: &str, at: u64| s.parse::<usize>().map_err(|_| Error::format(at, "bad PGM header number"));
    let (w, h, maxval) = (num(fields[1], 3)?, num(fields[2], 3)?, num(fields[3], 3)?);
    if maxval != 255 {
        return Err(Error::format(pos as u64, "maxval must be 255"));
    }
    let data = &bytes[(pos + 1).min(bytes.len())..];
    if data.len() != w * h {
        return Err(Error::format(pos as u64 + 1, "payload length differs from width * height"));
    }
    Ok((w, h, data))
}
