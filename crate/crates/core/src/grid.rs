//! Uniform 2D scalar grids and the domain newtypes built on them.
//!
//! A [`Grid2D`] stores `nz * nx` values row-major with depth as the slow
//! axis: `values[iz * nx + ix]` holds the sample at physical position
//! `(z, x) = (iz * dx, ix * dx)`. Grids are immutable after construction;
//! every public constructor rejects non-finite values.

use crate::error::Error;
use crate::Result;

/// Uniform 2D scalar field (depth x lateral) with isotropic spacing in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nz: usize,
    nx: usize,
    dx: f64,
    values: Vec<f64>,
}

impl Grid2D {
    /// Build a grid from row-major values, validating shape and finiteness.
    pub fn new(nz: usize, nx: usize, dx: f64, values: Vec<f64>) -> Result<Self> {
        if nz < 1 || nx < 1 {
            return Err(Error::InvalidGrid(format!(
                "grid dimensions must be at least 1x1, got {nz}x{nx}"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if values.len() != nz * nx {
            return Err(Error::InvalidGrid(format!(
                "expected {} values for a {nz}x{nx} grid, got {}",
                nz * nx,
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                context: format!("grid value {}", values[index]),
            });
        }
        Ok(Self { nz, nx, dx, values })
    }

    /// Grid filled with a single value.
    pub fn constant(nz: usize, nx: usize, dx: f64, value: f64) -> Result<Self> {
        Self::new(nz, nx, dx, vec![value; nz * nx])
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nz, nx >= 1 by construction
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Flat index of cell `(iz, ix)`.
    #[inline]
    pub fn idx(&self, iz: usize, ix: usize) -> usize {
        debug_assert!(iz < self.nz && ix < self.nx);
        iz * self.nx + ix
    }

    #[inline]
    pub fn get(&self, iz: usize, ix: usize) -> f64 {
        self.values[self.idx(iz, ix)]
    }

    /// Physical extent (depth_m, width_m) spanned by cell centers.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.nz - 1) as f64 * self.dx,
            (self.nx - 1) as f64 * self.dx,
        )
    }

    /// Nearest grid cell to a physical position (z_m, x_m), or an error if
    /// the position lies outside the grid extent.
    pub fn nearest_cell(&self, z_m: f64, x_m: f64) -> Result<(usize, usize)> {
        let (depth, width) = self.extent();
        let half = self.dx / 2.0;
        if z_m < -half || z_m > depth + half || x_m < -half || x_m > width + half {
            return Err(Error::Geometry(format!(
                "position ({z_m} m, {x_m} m) outside grid extent ({depth} m x {width} m)"
            )));
        }
        let iz = ((z_m / self.dx).round().max(0.0) as usize).min(self.nz - 1);
        let ix = ((x_m / self.dx).round().max(0.0) as usize).min(self.nx - 1);
        Ok((iz, ix))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// New grid with the same shape and `f` applied to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.nz, self.nx, self.dx, self.values.iter().map(|&v| f(v)).collect())
    }

    /// True when both grids share (nz, nx, dx).
    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.nz == other.nz && self.nx == other.nx && self.dx == other.dx
    }
}

/// Default sanity bounds for velocity models, in m/s.
pub const DEFAULT_VELOCITY_BOUNDS: (f64, f64) = (100.0, 10_000.0);

/// A [`Grid2D`] of P-wave velocities in m/s, kept within sanity bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    grid: Grid2D,
}

impl VelocityModel {
    /// Validate against the default sanity bounds.
    pub fn new(grid: Grid2D) -> Result<Self> {
        Self::with_bounds(grid, DEFAULT_VELOCITY_BOUNDS)
    }

    /// Validate against caller-supplied (min, max) bounds in m/s.
    pub fn with_bounds(grid: Grid2D, bounds: (f64, f64)) -> Result<Self> {
        let (lo, hi) = bounds;
        for &v in grid.values() {
            if v < lo || v > hi {
                return Err(Error::VelocityBounds {
                    found: v,
                    min_allowed: lo,
                    max_allowed: hi,
                    context: String::new(),
                });
            }
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn into_grid(self) -> Grid2D {
        self.grid
    }

    pub fn max_velocity(&self) -> f64 {
        self.grid.max()
    }

    pub fn min_velocity(&self) -> f64 {
        self.grid.min()
    }
}

/// Per-cell boolean grid with the same indexing convention as [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    nz: usize,
    nx: usize,
    dx: f64,
    values: Vec<bool>,
}

impl MaskGrid {
    pub fn new(nz: usize, nx: usize, dx: f64, values: Vec<bool>) -> Result<Self> {
        if nz < 1 || nx < 1 || !(dx > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "mask dimensions must be at least 1x1 with positive dx, got {nz}x{nx}, dx {dx}"
            )));
        }
        if values.len() != nz * nx {
            return Err(Error::InvalidGrid(format!(
                "expected {} mask cells for {nz}x{nx}, got {}",
                nz * nx,
                values.len()
            )));
        }
        Ok(Self { nz, nx, dx, values })
    }

    pub fn empty(nz: usize, nx: usize, dx: f64) -> Result<Self> {
        Self::new(nz, nx, dx, vec![false; nz * nx])
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    #[inline]
    pub fn idx(&self, iz: usize, ix: usize) -> usize {
        debug_assert!(iz < self.nz && ix < self.nx);
        iz * self.nx + ix
    }

    #[inline]
    pub fn get(&self, iz: usize, ix: usize) -> bool {
        self.values[self.idx(iz, ix)]
    }

    /// Number of set cells.
    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn same_shape_as_grid(&self, grid: &Grid2D) -> bool {
        self.nz == grid.nz() && self.nx == grid.nx() && self.dx == grid.dx()
    }
}
