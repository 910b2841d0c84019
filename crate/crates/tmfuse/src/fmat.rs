//! `FMAT1` binary matrices and CSV import/export.
//!
//! Layout: the 5 bytes `FMAT1`, little-endian `u32` channels, `u32` frames,
//! a `u8` dtype (0 = f64, 1 = f32), then the row-major payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use tmfuse_core::{FeatureMatrix, Real};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"FMAT1";
const HEADER: usize = 5 + 4 + 4 + 1;

/// A matrix as stored, in either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Fmat {
    F64(FeatureMatrix<f64>),
    F32(FeatureMatrix<f32>),
}

impl Fmat {
    pub fn to_f64(&self) -> FeatureMatrix<f64> {
        match self {
            Fmat::F64(m) => m.clone(),
            Fmat::F32(m) => m.cast(),
        }
    }

    pub fn to_f32(&self) -> FeatureMatrix<f32> {
        match self {
            Fmat::F64(m) => m.cast(),
            Fmat::F32(m) => m.clone(),
        }
    }
}

pub fn encode<T: Real>(m: &FeatureMatrix<T>) -> Vec<u8> {
    let width = if T::DTYPE == 0 { 8 } else { 4 };
    let mut out = Vec::with_capacity(HEADER + width * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(m.frames() as u32).to_le_bytes());
    out.push(T::DTYPE);
    for &v in m.data() {
        if T::DTYPE == 0 {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        } else {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

/// Parses an `FMAT1` buffer; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Fmat> {
    let bad = |msg: String| Error::format(path, msg);
    if bytes.len() < HEADER {
        return Err(bad(format!("header: expected {HEADER} bytes, got {}", bytes.len())));
    }
    if &bytes[..5] != MAGIC {
        return Err(bad(format!("magic: expected \"FMAT1\", got {:?}", String::from_utf8_lossy(&bytes[..5]))));
    }
    let channels = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let frames = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let dtype = bytes[13];
    if channels == 0 {
        return Err(bad("channels=0".into()));
    }
    if frames == 0 {
        return Err(bad("frames=0".into()));
    }
    let width = match dtype {
        0 => 8,
        1 => 4,
        d => return Err(bad(format!("dtype={d} (expected 0 for f64 or 1 for f32)"))),
    };
    let payload = &bytes[HEADER..];
    let want = channels
        .checked_mul(frames)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| bad(format!("channels={channels} frames={frames} overflow")))?;
    if payload.len() != want {
        return Err(bad(format!("payload: expected {want} bytes for {channels}x{frames}, got {}", payload.len())));
    }
    let wrap = |e: tmfuse_core::Error| bad(format!("payload: {e}"));
    Ok(if dtype == 0 {
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Fmat::F64(FeatureMatrix::new(channels, frames, data).map_err(wrap)?)
    } else {
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Fmat::F32(FeatureMatrix::new(channels, frames, data).map_err(wrap)?)
    })
}

pub fn save<T: Real>(path: impl AsRef<Path>, m: &FeatureMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    w.write_all(&encode(m)).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Fmat> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Loads any stored precision as `f64`.
pub fn load_f64(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    Ok(load(path)?.to_f64())
}

/// One CSV row per channel, no header.
pub fn write_csv<T: Real>(path: impl AsRef<Path>, m: &FeatureMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for c in 0..m.channels() {
        w.write_record(m.row(c).iter().map(|v| format!("{}", v.as_f64())))
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .map_err(|_| Error::format(path, format!("row {} column {}: not a number: {f:?}", i + 1, j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no rows"));
    }
    FeatureMatrix::from_rows(&rows).map_err(|e| Error::format(path, e.to_string()))
}

/// Loads `.csv` files as CSV and everything else as `FMAT1`.
pub fn load_any(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    if is_csv(path) {
        read_csv(path)
    } else {
        load_f64(path)
    }
}

/// Like [`load_any`], keeping the stored precision of `FMAT1` files.
pub fn load_any_typed(path: impl AsRef<Path>) -> Result<Fmat> {
    let path = path.as_ref();
    if is_csv(path) {
        read_csv(path).map(Fmat::F64)
    } else {
        load(path)
    }
}

pub fn save_any<T: Real>(path: impl AsRef<Path>, m: &FeatureMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        write_csv(path, m)
    } else {
        save(path, m)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
