//! Acquisition geometry and recorded data containers.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::Grid2D;
use crate::Result;

/// Source/receiver surface positions plus the recording clock.
///
/// Positions are physical (z_m, x_m) pairs; the solver snaps each to the
/// nearest grid cell (no sub-cell interpolation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    pub source_positions: Vec<(f64, f64)>,
    pub receiver_positions: Vec<(f64, f64)>,
    pub record_dt: f64,
    pub n_steps: usize,
}

impl AcquisitionGeometry {
    /// Evenly spaced surface lines centered on the model width, at depth 0.
    ///
    /// A line of `n` positions spaced `spacing` meters spans `(n-1)*spacing`
    /// and is centered within `width_m`.
    pub fn surface_lines(
        width_m: f64,
        n_sources: usize,
        source_spacing_m: f64,
        n_receivers: usize,
        receiver_spacing_m: f64,
        record_dt: f64,
        n_steps: usize,
    ) -> Result<Self> {
        let line = |n: usize, spacing: f64| -> Result<Vec<(f64, f64)>> {
            if n == 0 {
                return Err(Error::Geometry("line needs at least one position".into()));
            }
            let span = (n - 1) as f64 * spacing;
            if span > width_m {
                return Err(Error::Geometry(format!(
                    "line span {span} m exceeds model width {width_m} m"
                )));
            }
            let start = (width_m - span) / 2.0;
            Ok((0..n).map(|i| (0.0, start + i as f64 * spacing)).collect())
        };
        let geom = Self {
            source_positions: line(n_sources, source_spacing_m)?,
            receiver_positions: line(n_receivers, receiver_spacing_m)?,
            record_dt,
            n_steps,
        };
        geom.validate_clock()?;
        Ok(geom)
    }

    fn validate_clock(&self) -> Result<()> {
        if self.record_dt <= 0.0 {
            return Err(Error::Geometry(format!(
                "record_dt must be positive, got {}",
                self.record_dt
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::Geometry("n_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Check every position against a grid extent and the clock invariants.
    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        self.validate_clock()?;
        if self.source_positions.is_empty() || self.receiver_positions.is_empty() {
            return Err(Error::Geometry(
                "geometry needs at least one source and one receiver".into(),
            ));
        }
        for &(z, x) in self
            .source_positions
            .iter()
            .chain(self.receiver_positions.iter())
        {
            grid.nearest_cell(z, x)?;
        }
        Ok(())
    }

    /// Total recorded time span, `n_steps * record_dt`.
    pub fn recorded_time(&self) -> f64 {
        self.n_steps as f64 * self.record_dt
    }
}

/// Receiver-by-time matrix of recorded pressure for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotGather {
    pub source_index: usize,
    pub record_dt: f64,
    n_receivers: usize,
    n_steps: usize,
    /// Row-major: `traces[r * n_steps + k]` is receiver `r` at time `(k+1)*record_dt`.
    traces: Vec<f64>,
}

impl ShotGather {
    pub fn new(
        source_index: usize,
        record_dt: f64,
        n_receivers: usize,
        n_steps: usize,
        traces: Vec<f64>,
    ) -> Result<Self> {
        if traces.len() != n_receivers * n_steps {
            return Err(Error::ShapeMismatch(format!(
                "gather needs {} samples for {n_receivers} receivers x {n_steps} steps, got {}",
                n_receivers * n_steps,
                traces.len()
            )));
        }
        if let Some(index) = traces.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                context: format!("gather for source {source_index}"),
            });
        }
        Ok(Self {
            source_index,
            record_dt,
            n_receivers,
            n_steps,
            traces,
        })
    }

    pub fn zeros(source_index: usize, record_dt: f64, n_receivers: usize, n_steps: usize) -> Self {
        Self {
            source_index,
            record_dt,
            n_receivers,
            n_steps,
            traces: vec![0.0; n_receivers * n_steps],
        }
    }

    pub fn n_receivers(&self) -> usize {
        self.n_receivers
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn trace(&self, receiver: usize) -> &[f64] {
        &self.traces[receiver * self.n_steps..(receiver + 1) * self.n_steps]
    }

    pub fn traces(&self) -> &[f64] {
        &self.traces
    }

    pub fn traces_mut(&mut self) -> &mut [f64] {
        &mut self.traces
    }

    /// View the gather as a grid (nz = receivers, nx = steps) for persistence;
    /// the grid "dx" carries the record interval.
    pub fn to_grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.n_receivers, self.n_steps, self.record_dt, self.traces.clone())
    }

    /// Rebuild a gather from its grid form.
    pub fn from_grid(source_index: usize, grid: &Grid2D) -> Result<Self> {
        Self::new(
            source_index,
            grid.dx(),
            grid.nz(),
            grid.nx(),
            grid.values().to_vec(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_lines_are_centered() {
        let g = AcquisitionGeometry::surface_lines(2048.0, 25, 80.0, 100, 20.0, 0.004, 511).unwrap();
        assert_eq!(g.source_positions.len(), 25);
        assert_eq!(g.receiver_positions.len(), 100);
        // 24 intervals of 80 m = 1920 m span, centered in 2048 m
        assert_eq!(g.source_positions[0], (0.0, 64.0));
        assert_eq!(g.source_positions[24], (0.0, 1984.0));
        // 99 intervals of 20 m = 1980 m span
        assert_eq!(g.receiver_positions[0], (0.0, 34.0));
        assert!((g.recorded_time() - 2.044).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_out_of_extent_positions() {
        let grid = Grid2D::constant(16, 16, 4.0, 1500.0).unwrap();
        let geom = AcquisitionGeometry {
            source_positions: vec![(0.0, 100.0)],
            receiver_positions: vec![(0.0, 20.0)],
            record_dt: 0.004,
            n_steps: 16,
        };
        assert!(geom.validate(&grid).is_err()); // x=100 m > 60 m extent
    }

    #[test]
    fn gather_trace_layout() {
        let g = ShotGather::new(0, 0.004, 2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(g.trace(0), &[1., 2., 3.]);
        assert_eq!(g.trace(1), &[4., 5., 6.]);
        let grid = g.to_grid().unwrap();
        let back = ShotGather::from_grid(0, &grid).unwrap();
        assert_eq!(back, g);
    }
}
