//! Time-domain finite-difference solver for the 2D scalar wave equation.
//!
//! Leapfrog (second order) in time, 2nd- or 4th-order centered stencils in
//! space, exponential sponge absorbing layers on all four sides, point
//! sources injected at the nearest grid cell, multi-receiver recording at
//! the record cadence.
//!
//! The physical grid is padded by the sponge width; everything recorded or
//! returned refers to the interior (physical) grid only. Because the record
//! interval generally violates the CFL bound, the solver substeps internally
//! at `dt = record_dt / ceil(record_dt / stable_dt)` and records every
//! substep multiple.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{AcquisitionGeometry, ShotGather};
use crate::grid::{Grid2D, VelocityModel};
use crate::wavelet::SourceWavelet;
use crate::Result;

/// Spatial discretization order of the Laplacian stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpatialOrder {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "4")]
    Four,
}

impl SpatialOrder {
    /// 1D second-derivative stencil coefficients (unit spacing).
    pub fn stencil(self) -> &'static [f64] {
        match self {
            SpatialOrder::Two => &[1.0, -2.0, 1.0],
            SpatialOrder::Four => &[-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
        }
    }

    pub fn radius(self) -> usize {
        match self {
            SpatialOrder::Two => 1,
            SpatialOrder::Four => 2,
        }
    }
}

/// Solver tuning knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub spatial_order: SpatialOrder,
    /// Sponge thickness in cells on each side. Zero disables absorption
    /// (reflecting Dirichlet edges).
    pub boundary_width: usize,
    /// Dimensionless sponge strength; the per-step damping profile is
    /// `exp(-(strength * (1 - i/width))^2)` with `i` counted from the outer
    /// edge.
    pub boundary_strength: f64,
    /// Fraction of the CFL bound to run at, in (0, 1].
    pub cfl_safety: f64,
    /// Store interior wavefield snapshots at record cadence.
    pub store_snapshots: bool,
    /// Diagnostic override of the internal time step. Bypasses the CFL
    /// derivation; used to exercise the instability detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_override: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let width = 50;
        Self {
            spatial_order: SpatialOrder::Four,
            boundary_width: width,
            boundary_strength: 0.005 * width as f64,
            cfl_safety: 0.9,
            store_snapshots: false,
            dt_override: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_safety must be in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if self.boundary_strength < 0.0 {
            return Err(Error::Config(format!(
                "boundary_strength must be non-negative, got {}",
                self.boundary_strength
            )));
        }
        Ok(())
    }

    pub fn with_snapshots(mut self, store: bool) -> Self {
        self.store_snapshots = store;
        self
    }
}

/// CFL coefficient `2 / sqrt(2 * sum |c_k|)` of the chosen stencil applied
/// along both axes (von Neumann bound for the 2D leapfrog update).
pub fn cfl_coefficient(order: SpatialOrder) -> f64 {
    let sum_abs: f64 = order.stencil().iter().map(|c| c.abs()).sum();
    2.0 / (2.0 * sum_abs).sqrt()
}

/// Largest stable internal time step: `cfl_safety * C(order) * dx / v_max`.
pub fn stable_dt(v_max: f64, dx: f64, order: SpatialOrder, cfl_safety: f64) -> f64 {
    cfl_safety * cfl_coefficient(order) * dx / v_max
}

/// Internal substeps per record step for a given record interval.
pub fn substeps(record_dt: f64, stable: f64) -> usize {
    (record_dt / stable).ceil().max(1.0) as usize
}

/// Interior wavefield snapshots at record cadence.
///
/// `frames[k]` is the interior field at forward time `k * record_dt`;
/// `frames[0]` is the all-zero initial state, so there are `n_steps + 1`
/// frames for a gather of `n_steps` samples.
#[derive(Debug, Clone)]
pub struct WavefieldSnapshots {
    pub nz: usize,
    pub nx: usize,
    pub dx: f64,
    pub record_dt: f64,
    pub frames: Vec<Vec<f64>>,
}

impl WavefieldSnapshots {
    /// Sum of squared interior field values per frame.
    pub fn energies(&self) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.iter().map(|v| v * v).sum())
            .collect()
    }
}

/// Shared FD machinery: padded model, damping profile, stencil application.
/// One instance per propagation; owns no wavefield state.
pub(crate) struct Stepper {
    /// Interior dims.
    pub nz: usize,
    pub nx: usize,
    /// Total dims including sponge pad and stencil halo.
    pub nz_t: usize,
    pub nx_t: usize,
    /// Offset of the interior origin inside the total array (pad + halo).
    pub off: usize,
    pub dx: f64,
    pub dt: f64,
    pub sub: usize,
    stencil: &'static [f64],
    radius: usize,
    /// v^2 dt^2 on the padded grid (halo entries are zero and never used).
    v2dt2: Vec<f64>,
    /// Per-step damping profile on the padded grid.
    damp: Vec<f64>,
    damped: bool,
}

impl Stepper {
    pub fn new(model: &VelocityModel, record_dt: f64, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = model.grid();
        let (nz, nx, dx) = (grid.nz(), grid.nx(), grid.dx());
        let pad = config.boundary_width;
        let radius = config.spatial_order.radius();
        let off = pad + radius;
        let nz_t = nz + 2 * off;
        let nx_t = nx + 2 * off;

        let stable = stable_dt(model.max_velocity(), dx, config.spatial_order, config.cfl_safety);
        let (dt, sub) = match config.dt_override {
            Some(dt) => (dt, (record_dt / dt).round().max(1.0) as usize),
            None => {
                let sub = substeps(record_dt, stable);
                (record_dt / sub as f64, sub)
            }
        };

        // pad velocity by edge replication; squared and scaled once
        let mut v2dt2 = vec![0.0; nz_t * nx_t];
        for iz in 0..nz_t {
            for ix in 0..nx_t {
                // halo ring stays zero (Dirichlet); sponge gets edge values
                if iz < radius || iz >= nz_t - radius || ix < radius || ix >= nx_t - radius {
                    continue;
                }
                let src_z = iz.saturating_sub(off).min(nz - 1);
                let src_x = ix.saturating_sub(off).min(nx - 1);
                let v = grid.get(src_z, src_x);
                v2dt2[iz * nx_t + ix] = v * v * dt * dt;
            }
        }

        // separable sponge profile, 1.0 in the interior
        let axis_profile = |n_total: usize, n_interior: usize| -> Vec<f64> {
            let mut w = vec![1.0; n_total];
            if pad == 0 {
                return w;
            }
            let s = config.boundary_strength;
            for i in 0..n_total {
                // distance from the outer edge of the sponge, in cells
                let lo = i as isize - radius as isize;
                let hi = n_total as isize - 1 - radius as isize - i as isize;
                let d = lo.min(hi);
                if d < 0 {
                    w[i] = 1.0; // halo: never damped, stays zero anyway
                } else if (d as usize) < pad {
                    let x = s * (1.0 - d as f64 / pad as f64);
                    w[i] = (-(x * x)).exp();
                }
                let _ = n_interior;
            }
            w
        };
        let wz = axis_profile(nz_t, nz);
        let wx = axis_profile(nx_t, nx);
        let mut damp = vec![1.0; nz_t * nx_t];
        let mut damped = false;
        for iz in 0..nz_t {
            for ix in 0..nx_t {
                let w = wz[iz] * wx[ix];
                damp[iz * nx_t + ix] = w;
                if w != 1.0 {
                    damped = true;
                }
            }
        }

        Ok(Self {
            nz,
            nx,
            nz_t,
            nx_t,
            off,
            dx,
            dt,
            sub,
            stencil: config.spatial_order.stencil(),
            radius,
            v2dt2,
            damp,
            damped,
        })
    }

    pub fn alloc_field(&self) -> Vec<f64> {
        vec![0.0; self.nz_t * self.nx_t]
    }

    /// Flat padded index of an interior cell.
    #[inline]
    pub fn interior_idx(&self, iz: usize, ix: usize) -> usize {
        (iz + self.off) * self.nx_t + (ix + self.off)
    }

    /// `next = 2 cur - prev + v^2 dt^2 lap(cur)` over the active region.
    /// The caller injects sources into `next` afterwards, then calls
    /// [`Stepper::damp`].
    pub fn step(&self, prev: &[f64], cur: &[f64], next: &mut [f64]) {
        let r = self.radius;
        let nx_t = self.nx_t;
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        for iz in r..self.nz_t - r {
            let row = iz * nx_t;
            for ix in r..nx_t - r {
                let i = row + ix;
                let mut lap = 0.0;
                for (s, &c) in self.stencil.iter().enumerate() {
                    let o = s as isize - r as isize;
                    lap += c * (cur[(i as isize + o) as usize]
                        + cur[(i as isize + o * nx_t as isize) as usize]);
                }
                next[i] = 2.0 * cur[i] - prev[i] + self.v2dt2[i] * lap * inv_dx2;
            }
        }
    }

    /// Apply the sponge to the current and freshly computed fields.
    pub fn damp(&self, cur: &mut [f64], next: &mut [f64]) {
        if !self.damped {
            return;
        }
        for i in 0..cur.len() {
            let w = self.damp[i];
            cur[i] *= w;
            next[i] *= w;
        }
    }

    /// Point-source injection consistent with the continuous source term:
    /// adds `amount * v^2(cell) * dt^2 / dx^2` to `next` at the padded index.
    #[inline]
    pub fn inject_point(&self, next: &mut [f64], padded_idx: usize, amount: f64) {
        next[padded_idx] += amount * self.v2dt2[padded_idx] / (self.dx * self.dx);
    }

    /// Distributed right-hand-side injection: adds `v^2 dt^2 * rhs` cellwise
    /// over the interior.
    pub fn inject_interior_rhs(&self, next: &mut [f64], rhs: &[f64]) {
        debug_assert_eq!(rhs.len(), self.nz * self.nx);
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                let i = self.interior_idx(iz, ix);
                next[i] += self.v2dt2[i] * rhs[iz * self.nx + ix];
            }
        }
    }

    /// Copy the interior region out of a padded field.
    pub fn extract_interior(&self, field: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nz * self.nx);
        for iz in 0..self.nz {
            let start = (iz + self.off) * self.nx_t + self.off;
            out.extend_from_slice(&field[start..start + self.nx]);
        }
        out
    }

    /// Instability guard: non-finite values or magnitudes beyond 1e30 (the
    /// latter catches exponential blow-up long before f64 overflow).
    pub fn check_stable(&self, field: &[f64], internal_step: usize) -> Result<()> {
        for &v in field {
            if !v.is_finite() || v.abs() > 1e30 {
                return Err(Error::Instability {
                    step: internal_step,
                });
            }
        }
        Ok(())
    }

    /// Snap a physical position to a padded flat index.
    pub fn snap(&self, grid: &Grid2D, z_m: f64, x_m: f64) -> Result<usize> {
        let (iz, ix) = grid.nearest_cell(z_m, x_m)?;
        Ok(self.interior_idx(iz, ix))
    }
}

/// Propagate one shot through the model.
///
/// The wavelet's sample interval must equal the geometry's record interval;
/// internally the solver re-evaluates the Ricker formula at its substep
/// size rather than interpolating samples. Initial conditions are
/// `p = dp/dt = 0`.
pub fn propagate(
    model: &VelocityModel,
    geometry: &AcquisitionGeometry,
    source_index: usize,
    wavelet: &SourceWavelet,
    config: &SolverConfig,
) -> Result<(ShotGather, Option<WavefieldSnapshots>)> {
    let grid = model.grid();
    geometry.validate(grid)?;
    if source_index >= geometry.source_positions.len() {
        return Err(Error::Geometry(format!(
            "source index {source_index} out of range ({} sources)",
            geometry.source_positions.len()
        )));
    }
    if (wavelet.dt - geometry.record_dt).abs() > 1e-12 {
        return Err(Error::Geometry(format!(
            "wavelet dt {} must equal record_dt {}",
            wavelet.dt, geometry.record_dt
        )));
    }

    let stepper = Stepper::new(model, geometry.record_dt, config)?;
    let (sz, sx) = geometry.source_positions[source_index];
    let src = stepper.snap(grid, sz, sx)?;
    let receivers: Vec<usize> = geometry
        .receiver_positions
        .iter()
        .map(|&(z, x)| stepper.snap(grid, z, x))
        .collect::<Result<_>>()?;

    let n_steps = geometry.n_steps;
    let mut traces = vec![0.0; receivers.len() * n_steps];
    let mut snapshots = config.store_snapshots.then(|| {
        let mut frames = Vec::with_capacity(n_steps + 1);
        frames.push(vec![0.0; stepper.nz * stepper.nx]);
        frames
    });

    let mut prev = stepper.alloc_field();
    let mut cur = stepper.alloc_field();
    let mut next = stepper.alloc_field();

    let total_internal = n_steps * stepper.sub;
    for k in 0..total_internal {
        stepper.step(&prev, &cur, &mut next);
        let tau = k as f64 * stepper.dt;
        stepper.inject_point(&mut next, src, wavelet.at(tau));
        stepper.damp(&mut cur, &mut next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);

        if (k + 1) % stepper.sub == 0 {
            let record_step = (k + 1) / stepper.sub - 1;
            stepper.check_stable(&cur, k + 1)?;
            for (r, &cell) in receivers.iter().enumerate() {
                traces[r * n_steps + record_step] = cur[cell];
            }
            if let Some(frames) = snapshots.as_mut() {
                frames.push(stepper.extract_interior(&cur));
            }
        }
    }

    let gather = ShotGather::new(
        source_index,
        geometry.record_dt,
        receivers.len(),
        n_steps,
        traces,
    )?;
    let snaps = snapshots.map(|frames| WavefieldSnapshots {
        nz: stepper.nz,
        nx: stepper.nx,
        dx: stepper.dx,
        record_dt: geometry.record_dt,
        frames,
    });
    Ok((gather, snaps))
}

/// One gather per source. Shots run in parallel but results are collected in
/// source order, so the output is identical to sequential execution.
pub fn simulate_survey(
    model: &VelocityModel,
    geometry: &AcquisitionGeometry,
    wavelet: &SourceWavelet,
    config: &SolverConfig,
) -> Result<Vec<ShotGather>> {
    let config = config.clone().with_snapshots(false);
    (0..geometry.source_positions.len())
        .into_par_iter()
        .map(|s| {
            propagate(model, geometry, s, wavelet, &config)
                .map(|(g, _)| g)
                .map_err(|e| Error::Geometry(format!("source {s}: {e}")))
        })
        .collect()
}
