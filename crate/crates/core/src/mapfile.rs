//! Binary scattering-map files and grayscale heatmap rendering.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 8    | magic `CPCLMAP1`               |
//! | 8      | 8    | delay bins `M` (f64)           |
//! | 16     | 8    | Doppler bins `D` (f64)         |
//! | 24     | 8    | delay bin width, s (f64)       |
//! | 32     | 8    | Doppler bin width, Hz (f64)    |
//! | 40     | 24   | zero                           |
//! | 64     | 4MD  | power as f32, delay-major      |
//!
//! Row `m` holds the `D` Doppler bins of delay bin `m`, zero Doppler at
//! column `D / 2`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::receiver::ScatteringMap;

pub const MAGIC: &[u8; 8] = b"CPCLMAP1";
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum MapFileError {
    #[error("unreadable map: {0}")]
    UnreadableMap(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_map<W: Write>(mut w: W, map: &ScatteringMap) -> io::Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..8].copy_from_slice(MAGIC);
    header[8..16].copy_from_slice(&(map.delay_bins() as f64).to_le_bytes());
    header[16..24].copy_from_slice(&(map.doppler_bins() as f64).to_le_bytes());
    header[24..32].copy_from_slice(&map.delay_bin_s.to_le_bytes());
    header[32..40].copy_from_slice(&map.doppler_bin_hz.to_le_bytes());
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(4 * map.power.as_slice().len());
    for &v in map.power.iter() {
        body.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&body)
}

pub fn read_map<R: Read>(mut r: R) -> Result<ScatteringMap, MapFileError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_map(&bytes)
}

pub fn decode_map(bytes: &[u8]) -> Result<ScatteringMap, MapFileError> {
    let bad = |msg: &str| MapFileError::UnreadableMap(msg.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("file shorter than the header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let count = |o: usize, what: &str| {
        let v = f64_at(o);
        if v >= 0.0 && v.fract() == 0.0 && v <= (1u64 << 52) as f64 {
            Ok(v as usize)
        } else {
            Err(MapFileError::UnreadableMap(format!("{what} count {v} is not a whole number")))
        }
    };
    let rows = count(8, "delay bin")?;
    let cols = count(16, "Doppler bin")?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(MapFileError::UnreadableMap(format!(
            "expected {expected} bytes for a {rows}x{cols} map, found {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(ScatteringMap {
        power: Matrix::from_vec(rows, cols, data),
        delay_bin_s: f64_at(24),
        doppler_bin_hz: f64_at(32),
    })
}

pub fn save_map(path: &Path, map: &ScatteringMap) -> io::Result<()> {
    let mut buf = Vec::new();
    write_map(&mut buf, map)?;
    fs::write(path, buf)
}

pub fn load_map(path: &Path) -> Result<ScatteringMap, MapFileError> {
    let bytes = fs::read(path).map_err(|e| MapFileError::UnreadableMap(format!("{}: {e}", path.display())))?;
    decode_map(&bytes)
}

/// Binary PGM (P5) of the map in dB relative to its peak, clipped
/// `db_floor` dB below. Delay runs left to right, Doppler bottom to top with
/// zero Doppler in the middle row. A zero floor keeps only peak-valued
/// cells.
pub fn render_heatmap(map: &ScatteringMap, db_floor: f64) -> Vec<u8> {
    let width = map.delay_bins();
    let height = map.doppler_bins();
    let peak = map.power.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = db_floor.abs();
    let pixel = |v: f64| -> u8 {
        if !(peak > 0.0) {
            return 0;
        }
        if floor == 0.0 {
            return if v >= peak { 255 } else { 0 };
        }
        if !(v > 0.0) {
            return 0;
        }
        let db = 10.0 * (v / peak).log10();
        (255.0 * (1.0 + db / floor)).round().clamp(0.0, 255.0) as u8
    };
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.reserve(width * height);
    for y in 0..height {
        let column = height - 1 - y;
        for x in 0..width {
            out.push(pixel(map.power[(x, column)]));
        }
    }
    out
}

pub fn export_heatmap(map_path: &Path, image_path: &Path, db_floor: f64) -> Result<(), MapFileError> {
    let map = load_map(map_path)?;
    fs::write(image_path, render_heatmap(&map, db_floor))?;
    Ok(())
}
