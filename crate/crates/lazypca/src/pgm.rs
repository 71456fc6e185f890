//! Binary PGM (P5) serialization.
//!
//! Level-index images are stored with `maxval = levels - 1`, one byte per
//! sample (two big-endian bytes when maxval > 255), so a write/read cycle is
//! bit-exact. A separate "view" export rescales levels onto 0..=255 for
//! inspection in ordinary viewers. PGM rasters are row-major; the in-memory
//! layout is column-major, so the writer transposes on the way out.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::image::{ImageError, LevelImage};
use crate::lattice::to_linear;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("not a binary PGM (P5) file")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("pixel data truncated: expected {0} bytes, found {1}")]
    Truncated(usize, usize),
    #[error("unsupported maxval {0}")]
    BadMaxval(u32),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Serializes the image as canonical P5 bytes.
pub fn to_pgm_bytes(img: &LevelImage) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let maxval = img.levels() - 1;
    let wide = maxval > 255;
    let mut out = Vec::with_capacity(32 + img.len() * if wide { 2 } else { 1 });
    write!(out, "P5\n{} {}\n{}\n", w, h, maxval).unwrap();
    for r in 0..h {
        for c in 0..w {
            let v = img.level_at(to_linear(r, c, h));
            if wide {
                out.extend_from_slice(&v.to_be_bytes());
            } else {
                out.push(v as u8);
            }
        }
    }
    out
}

pub fn write_pgm(img: &LevelImage, path: &Path) -> Result<(), PgmError> {
    fs::write(path, to_pgm_bytes(img))?;
    Ok(())
}

/// Writes an 8-bit copy with levels rescaled by `255 / (levels - 1)`.
pub fn write_view_pgm(img: &LevelImage, path: &Path) -> Result<(), PgmError> {
    let (w, h) = (img.width(), img.height());
    let denom = (img.levels() as u32).saturating_sub(1).max(1);
    let mut out = Vec::with_capacity(32 + img.len());
    write!(out, "P5\n{} {}\n255\n", w, h).unwrap();
    for r in 0..h {
        for c in 0..w {
            let v = img.level_at(to_linear(r, c, h)) as u32;
            out.push(((v * 255 + denom / 2) / denom) as u8);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<LevelImage, PgmError> {
    from_pgm_bytes(&fs::read(path)?)
}

pub fn from_pgm_bytes(bytes: &[u8]) -> Result<LevelImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        *field = next_header_value(bytes, &mut pos)?;
    }
    let (w, h, maxval) = (fields[0] as usize, fields[1] as usize, fields[2]);
    if maxval == 0 || maxval > 65534 {
        return Err(PgmError::BadMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let wide = maxval > 255;
    let sample = if wide { 2 } else { 1 };
    let need = w * h * sample;
    if bytes.len() < pos + need {
        return Err(PgmError::Truncated(need, bytes.len().saturating_sub(pos)));
    }
    let raster = &bytes[pos..pos + need];
    let mut data = vec![0u16; w * h];
    for r in 0..h {
        for c in 0..w {
            let k = (r * w + c) * sample;
            let v = if wide {
                u16::from_be_bytes([raster[k], raster[k + 1]])
            } else {
                raster[k] as u16
            };
            data[to_linear(r, c, h)] = v;
        }
    }
    Ok(LevelImage::new(w, h, (maxval + 1) as u16, data)?)
}

/// Reads the next ASCII integer in the header, skipping whitespace and
/// `#` comment lines.
fn next_header_value(bytes: &[u8], pos: &mut usize) -> Result<u32, PgmError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err(PgmError::BadHeader("expected integer".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .unwrap()
        .parse::<u32>()
        .map_err(|e| PgmError::BadHeader(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_image() -> LevelImage {
        LevelImage::new(3, 2, 5, vec![0, 1, 2, 3, 4, 0]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let img = sample_image();
        let bytes = to_pgm_bytes(&img);
        let back = from_pgm_bytes(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(to_pgm_bytes(&back), bytes);
    }

    #[test]
    fn header_carries_levels_minus_one() {
        let bytes = to_pgm_bytes(&sample_image());
        assert!(bytes.starts_with(b"P5\n3 2\n4\n"));
    }

    #[test]
    fn wide_samples_round_trip() {
        let img = LevelImage::new(2, 2, 400, vec![0, 399, 256, 7]).unwrap();
        let back = from_pgm_bytes(&to_pgm_bytes(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn reader_skips_comments() {
        let bytes = b"P5\n# a comment\n2 1\n# another\n1\n\x00\x01";
        let img = from_pgm_bytes(bytes).unwrap();
        assert_eq!(img.data(), &[0, 1]);
        assert_eq!(img.levels(), 2);
    }

    #[test]
    fn view_export_rescales_to_255() {
        let img = sample_image();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.pgm");
        write_view_pgm(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        // Raster is row-major: level 4 sits at (r=0, c=2) in the original.
        let raster = &bytes[b"P5\n3 2\n255\n".len()..];
        assert_eq!(raster[2], 255);
        assert_eq!(raster[0], 0);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let mut bytes = to_pgm_bytes(&sample_image());
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(from_pgm_bytes(&bytes), Err(PgmError::Truncated(..))));
    }
}
