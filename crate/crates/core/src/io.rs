//! Bit-exact grid file I/O.
//!
//! Grids are stored as raw 32-bit IEEE-754 little-endian floats, row-major,
//! with a JSON sidecar `{nz, nx, dx_m, kind, crc32}`. Masks use one byte per
//! cell (0 or 1) with `kind = "mask"`. The binary payload stays trivially
//! memory-mappable; the CRC-32 of the payload catches partial writes.
//!
//! In-memory grids hold `f64`; files hold `f32`. `read(write(g))` is
//! bit-identical whenever `g`'s values are exactly representable as `f32`,
//! which holds for everything this crate writes (all persisted products are
//! rounded through `f32` at write time).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{Grid2D, MaskGrid};
use crate::Result;

/// What a stored grid holds; persisted in the sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Velocity,
    Image,
    Saturation,
    Factor,
    Mask,
    Gather,
}

/// JSON sidecar describing a binary grid payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMeta {
    pub nz: usize,
    pub nx: usize,
    pub dx_m: f64,
    pub kind: GridKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crc32: Option<u32>,
    /// Set for shot gathers, where `dx_m` carries the record interval in
    /// seconds instead of a spatial spacing.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dx_is_record_dt: bool,
}

fn read_meta(path_meta: &Path) -> Result<GridMeta> {
    let text = fs::read_to_string(path_meta).map_err(|e| Error::io(path_meta, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Sidecar {
        path: path_meta.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_meta(meta: &GridMeta, path_meta: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).expect("sidecar serializes");
    write_atomic(path_meta, text.as_bytes())
}

/// Write bytes through a temp file + rename so readers never see a torn file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn checksum(bytes: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(bytes);
    h.finalize()
}

/// Read a `.f32` payload plus sidecar into a grid.
///
/// Fails on size mismatch, checksum mismatch, or non-finite values rather
/// than truncating or propagating bad data.
pub fn read_grid(path_data: &Path, path_meta: &Path) -> Result<(Grid2D, GridMeta)> {
    let meta = read_meta(path_meta)?;
    let bytes = fs::read(path_data).map_err(|e| Error::io(path_data, e))?;
    let expected = meta.nz as u64 * meta.nx as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path_data.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
            nz: meta.nz,
            nx: meta.nx,
        });
    }
    if let Some(stored) = meta.crc32 {
        let actual = checksum(&bytes);
        if actual != stored {
            return Err(Error::ChecksumMismatch {
                path: path_data.to_path_buf(),
                expected: stored,
                actual,
            });
        }
    }
    let mut values = Vec::with_capacity(meta.nz * meta.nx);
    for chunk in bytes.chunks_exact(4) {
        values.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index,
            context: format!("{}", path_data.display()),
        });
    }
    let grid = Grid2D::new(meta.nz, meta.nx, meta.dx_m, values)?;
    Ok((grid, meta))
}

/// Write a grid as `.f32` payload plus sidecar with a payload checksum.
pub fn write_grid(grid: &Grid2D, kind: GridKind, path_data: &Path, path_meta: &Path) -> Result<()> {
    write_grid_with(grid, kind, false, path_data, path_meta)
}

/// As [`write_grid`] but with control over the gather time-axis flag.
pub fn write_grid_with(
    grid: &Grid2D,
    kind: GridKind,
    dx_is_record_dt: bool,
    path_data: &Path,
    path_meta: &Path,
) -> Result<()> {
    let mut bytes = Vec::with_capacity(grid.len() * 4);
    for &v in grid.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let meta = GridMeta {
        nz: grid.nz(),
        nx: grid.nx(),
        dx_m: grid.dx(),
        kind,
        crc32: Some(checksum(&bytes)),
        dx_is_record_dt,
    };
    write_atomic(path_data, &bytes)?;
    write_meta(&meta, path_meta)
}

/// Read a `.u8` mask payload (0/1 bytes) plus sidecar.
pub fn read_mask(path_data: &Path, path_meta: &Path) -> Result<MaskGrid> {
    let meta = read_meta(path_meta)?;
    let bytes = fs::read(path_data).map_err(|e| Error::io(path_data, e))?;
    let expected = meta.nz as u64 * meta.nx as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path_data.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
            nz: meta.nz,
            nx: meta.nx,
        });
    }
    if let Some(stored) = meta.crc32 {
        let actual = checksum(&bytes);
        if actual != stored {
            return Err(Error::ChecksumMismatch {
                path: path_data.to_path_buf(),
                expected: stored,
                actual,
            });
        }
    }
    for (index, &b) in bytes.iter().enumerate() {
        if b > 1 {
            return Err(Error::Sidecar {
                path: path_data.to_path_buf(),
                message: format!("mask byte at index {index} is {b}, expected 0 or 1"),
            });
        }
    }
    MaskGrid::new(meta.nz, meta.nx, meta.dx_m, bytes.iter().map(|&b| b == 1).collect())
}

/// Write a mask as one byte per cell (0 or 1) plus sidecar.
pub fn write_mask(mask: &MaskGrid, path_data: &Path, path_meta: &Path) -> Result<()> {
    let bytes: Vec<u8> = mask.values().iter().map(|&b| u8::from(b)).collect();
    let meta = GridMeta {
        nz: mask.nz(),
        nx: mask.nx(),
        dx_m: mask.dx(),
        kind: GridKind::Mask,
        crc32: Some(checksum(&bytes)),
        dx_is_record_dt: false,
    };
    write_atomic(path_data, &bytes)?;
    write_meta(&meta, path_meta)
}
