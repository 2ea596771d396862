//! Gas-chimney physics: fracture network growth, diffusion-driven gas
//! saturation, rock-physics mixing, and the velocity perturbation applied to
//! a background model.
//!
//! A fracture network is grown by seeded random walks on the 8-connected
//! lattice. Gas diffuses from the fracture cells into the surrounding rock;
//! the resulting saturation drives a Reuss bulk-modulus average and a linear
//! density mix, which combine into a P-velocity change expressed as a
//! dimensionless multiplicative factor against the gas-free rock.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{Grid2D, MaskGrid, VelocityModel};
use crate::Result;

/// Seconds per year used for the diffusion-time conversion.
pub const SECONDS_PER_YEAR: f64 = 3.156e7;

/// Which error-function argument the saturation kernel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErfForm {
    /// Dimensionally consistent diffusion scale: `R / L` with
    /// `L = sqrt(4 D t)` by default (overridable via `l_eff_m`).
    Sqrt,
    /// Literal `R / (4 D t)`.
    Printed,
}

/// Gas and rock constants plus saturation-model switches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GasParams {
    /// Gas bulk modulus, Pa.
    pub k_g: f64,
    /// Shale bulk modulus, Pa.
    pub k_s: f64,
    /// Shear modulus, Pa (fluid-independent).
    pub g: f64,
    /// Gas density, kg/m^3.
    pub rho_g: f64,
    /// Shale density, kg/m^3.
    pub rho_s: f64,
    /// Diffusion coefficient, m^2/s.
    pub d: f64,
    /// Diffusion time, seconds.
    pub t: f64,
    /// Gas supply rate.
    pub h0: f64,
    /// Effective diffusion length override in meters for the `Sqrt` form.
    /// `None` uses `sqrt(4 D t)`.
    pub l_eff_m: Option<f64>,
    /// Clamp saturation into [0, 1] (on by default; saturation is a volume
    /// fraction).
    pub saturation_clamp: bool,
    pub erf_form: ErfForm,
    /// Saturation threshold for the chimney mask, in (0, 1).
    pub mask_threshold: f64,
}

impl Default for GasParams {
    /// Reference constants of the simulation setup. The shale bulk modulus
    /// below the gas modulus, the 3211 Pa shear modulus, and the equal
    /// gas/shale densities are adopted verbatim; tests assert formula
    /// behavior, not geological plausibility.
    fn default() -> Self {
        let d = 1.0e-12;
        Self {
            k_g: 8.0e8,
            k_s: 0.045e9,
            g: 3211.0,
            rho_g: 1900.0,
            rho_s: 1900.0,
            d,
            t: 750.0 * SECONDS_PER_YEAR,
            h0: 1.0e-3 / (8.0 * std::f64::consts::PI * d),
            l_eff_m: None,
            saturation_clamp: true,
            erf_form: ErfForm::Sqrt,
            mask_threshold: 0.5,
        }
    }
}

impl GasParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_g <= 0.0 || self.k_s <= 0.0 || self.rho_g <= 0.0 || self.rho_s <= 0.0 {
            return Err(Error::Config(
                "gas/shale moduli and densities must be positive".into(),
            ));
        }
        if self.g < 0.0 {
            return Err(Error::Config("shear modulus must be non-negative".into()));
        }
        if self.d <= 0.0 || self.t <= 0.0 {
            return Err(Error::Config(
                "diffusion coefficient and time must be positive".into(),
            ));
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return Err(Error::Config(format!(
                "mask_threshold must lie in (0, 1), got {}",
                self.mask_threshold
            )));
        }
        if let Some(l) = self.l_eff_m {
            if l <= 0.0 {
                return Err(Error::Config(format!("l_eff_m must be positive, got {l}")));
            }
        }
        Ok(())
    }

    /// Diffusion length `sqrt(4 D t)` in meters.
    pub fn diffusion_length(&self) -> f64 {
        (4.0 * self.d * self.t).sqrt()
    }

    /// Length scale actually used by the `Sqrt` kernel.
    pub fn effective_length(&self) -> f64 {
        self.l_eff_m.unwrap_or_else(|| self.diffusion_length())
    }
}

/// Growth direction of fracture walks relative to vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthDirection {
    Down,
    Up,
}

/// Fracture-growth parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractureParams {
    pub n_seeds: usize,
    /// Maximum cells per fracture, including the seed.
    pub max_length_cells: usize,
    /// Half-angle of the step-direction cone about vertical, degrees.
    pub max_angle_deg: f64,
    pub rng_seed: u64,
    /// Fraction of the depth range seeds are drawn from (lo, hi);
    /// avoids surface and bottom artifacts.
    pub depth_band: (f64, f64),
    pub direction: GrowthDirection,
}

impl Default for FractureParams {
    fn default() -> Self {
        Self {
            n_seeds: 3,
            max_length_cells: 40,
            max_angle_deg: 20.0,
            rng_seed: 0,
            depth_band: (0.2, 0.8),
            direction: GrowthDirection::Down,
        }
    }
}

impl FractureParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_length_cells == 0 {
            return Err(Error::Config("max_length_cells must be at least 1".into()));
        }
        if !(0.0..=90.0).contains(&self.max_angle_deg) {
            return Err(Error::Config(format!(
                "max_angle_deg must lie in [0, 90], got {}",
                self.max_angle_deg
            )));
        }
        let (lo, hi) = self.depth_band;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(Error::Config(format!(
                "depth_band must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Fracture indicator cells plus the walk bookkeeping that produced them.
#[derive(Debug, Clone)]
pub struct FractureNetwork {
    pub indicator: MaskGrid,
    /// Unique marked cells in first-visit order.
    pub cells: Vec<(usize, usize)>,
    pub seed_points: Vec<(usize, usize)>,
    pub params: FractureParams,
}

/// Serializable form of a fracture network (the indicator is rebuilt).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractureNetworkRecord {
    pub nz: usize,
    pub nx: usize,
    pub dx_m: f64,
    pub params: FractureParams,
    pub seed_points: Vec<(usize, usize)>,
    pub cells: Vec<(usize, usize)>,
}

impl FractureNetwork {
    pub fn to_record(&self) -> FractureNetworkRecord {
        FractureNetworkRecord {
            nz: self.indicator.nz(),
            nx: self.indicator.nx(),
            dx_m: self.indicator.dx(),
            params: self.params.clone(),
            seed_points: self.seed_points.clone(),
            cells: self.cells.clone(),
        }
    }

    pub fn from_record(record: FractureNetworkRecord) -> Result<Self> {
        let mut values = vec![false; record.nz * record.nx];
        for &(iz, ix) in &record.cells {
            if iz >= record.nz || ix >= record.nx {
                return Err(Error::InvalidGrid(format!(
                    "fracture cell ({iz}, {ix}) outside {}x{} grid",
                    record.nz, record.nx
                )));
            }
            values[iz * record.nx + ix] = true;
        }
        Ok(Self {
            indicator: MaskGrid::new(record.nz, record.nx, record.dx_m, values)?,
            cells: record.cells,
            seed_points: record.seed_points,
            params: record.params,
        })
    }
}

/// Grow a fracture network on an `nz x nx` grid by seeded random walks.
///
/// Seeds are drawn uniformly inside the configured depth band. From each
/// seed the walk repeatedly steps one cell in a direction drawn uniformly
/// from the cone of half-angle `max_angle_deg` about vertical (snapped to
/// the 8-connected lattice), stopping at `max_length_cells` or the grid
/// boundary. Deterministic for a fixed `rng_seed`. `n_seeds = 0` yields an
/// empty network (no chimney).
pub fn grow_fractures(
    nz: usize,
    nx: usize,
    dx: f64,
    params: &FractureParams,
) -> Result<FractureNetwork> {
    if nz == 0 || nx == 0 {
        return Err(Error::InvalidGrid("fracture grid must be non-empty".into()));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut visited = vec![false; nz * nx];
    let mut cells = Vec::new();
    let mut seed_points = Vec::new();

    let (band_lo, band_hi) = params.depth_band;
    let z_lo = ((band_lo * nz as f64).floor() as usize).min(nz - 1);
    let z_hi = ((band_hi * nz as f64).ceil() as usize).clamp(z_lo + 1, nz);
    let max_angle_rad = params.max_angle_deg.to_radians();

    let mut mark =
        |iz: usize, ix: usize, visited: &mut Vec<bool>, cells: &mut Vec<(usize, usize)>| {
            let i = iz * nx + ix;
            if !visited[i] {
                visited[i] = true;
                cells.push((iz, ix));
            }
        };

    for _ in 0..params.n_seeds {
        let iz0 = rng.gen_range(z_lo..z_hi);
        let ix0 = rng.gen_range(0..nx);
        seed_points.push((iz0, ix0));
        mark(iz0, ix0, &mut visited, &mut cells);

        let (mut iz, mut ix) = (iz0 as isize, ix0 as isize);
        let mut length = 1usize;
        while length < params.max_length_cells {
            let theta = if max_angle_rad == 0.0 {
                0.0
            } else {
                rng.gen_range(-max_angle_rad..=max_angle_rad)
            };
            // continuous unit step about vertical, then lattice snap
            let step_z = match params.direction {
                GrowthDirection::Down => theta.cos(),
                GrowthDirection::Up => -theta.cos(),
            };
            let step_x = theta.sin();
            iz += step_z.round() as isize;
            ix += step_x.round() as isize;
            if iz < 0 || ix < 0 || iz >= nz as isize || ix >= nx as isize {
                break;
            }
            mark(iz as usize, ix as usize, &mut visited, &mut cells);
            length += 1;
        }
    }

    Ok(FractureNetwork {
        indicator: MaskGrid::new(nz, nx, dx, visited)?,
        cells,
        seed_points,
        params: params.clone(),
    })
}

/// Gas volume fraction per cell, in [0, 1] once clamped.
#[derive(Debug, Clone)]
pub struct SaturationField {
    grid: Grid2D,
}

impl SaturationField {
    /// Wrap an existing grid as a saturation field (values are the caller's
    /// responsibility; [`saturation`] is the usual constructor).
    pub fn from_grid(grid: Grid2D) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn into_grid(self) -> Grid2D {
        self.grid
    }
}

/// Dimensionless multiplicative velocity factor; exactly 1 where `S = 0`.
#[derive(Debug, Clone)]
pub struct VpFactorField {
    grid: Grid2D,
}

impl VpFactorField {
    pub fn from_grid(grid: Grid2D) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn into_grid(self) -> Grid2D {
        self.grid
    }
}

/// Saturation kernel for one fracture cell at distance `r_m` (already
/// regularized): `dx^2 * H0 / (8 pi D r) * erfc(arg)`.
fn kernel(params: &GasParams, dx: f64, r_m: f64) -> f64 {
    let arg = match params.erf_form {
        ErfForm::Sqrt => r_m / params.effective_length(),
        ErfForm::Printed => r_m / (4.0 * params.d * params.t),
    };
    dx * dx * params.h0 / (8.0 * std::f64::consts::PI * params.d * r_m) * libm::erfc(arg)
}

/// Distance beyond which a single fracture cell contributes less than 1e-16,
/// or `None` if no such cutoff exists within `r_hi`.
fn cutoff_radius(params: &GasParams, dx: f64, r_hi: f64) -> Option<f64> {
    const TINY: f64 = 1e-16;
    if kernel(params, dx, r_hi) >= TINY {
        return None;
    }
    let mut lo = dx / 2.0;
    if kernel(params, dx, lo) < TINY {
        return Some(lo);
    }
    let mut hi = r_hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kernel(params, dx, mid) < TINY {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Unclamped saturation: superposition of the per-fracture-cell kernels with
/// self-cell regularization `R >= dx/2`. Contributions below 1e-16 per cell
/// are skipped (invisible at f64 precision next to O(1) values).
pub fn saturation_raw(network: &FractureNetwork, params: &GasParams, dx: f64) -> Result<Grid2D> {
    params.validate()?;
    let (nz, nx) = (network.indicator.nz(), network.indicator.nx());
    let mut field = vec![0.0; nz * nx];
    let r_min = dx / 2.0;
    let diag = dx * (((nz * nz + nx * nx) as f64).sqrt() + 1.0);
    let cutoff = cutoff_radius(params, dx, diag.max(r_min * 2.0));
    let cutoff_cells = cutoff.map(|r| (r / dx).ceil() as isize + 1);

    for &(fz, fx) in &network.cells {
        let (z_lo, z_hi, x_lo, x_hi) = match cutoff_cells {
            Some(c) => (
                (fz as isize - c).max(0) as usize,
                ((fz as isize + c + 1) as usize).min(nz),
                (fx as isize - c).max(0) as usize,
                ((fx as isize + c + 1) as usize).min(nx),
            ),
            None => (0, nz, 0, nx),
        };
        for iz in z_lo..z_hi {
            let zdist = (iz as f64 - fz as f64) * dx;
            for ix in x_lo..x_hi {
                let xdist = (ix as f64 - fx as f64) * dx;
                let r = (zdist * zdist + xdist * xdist).sqrt().max(r_min);
                if let Some(rc) = cutoff {
                    if r > rc {
                        continue;
                    }
                }
                field[iz * nx + ix] += kernel(params, dx, r);
            }
        }
    }
    Grid2D::new(nz, nx, dx, field)
}

/// Gas volume fraction field; clamped to [0, 1] when the clamp flag is on.
pub fn saturation(
    network: &FractureNetwork,
    params: &GasParams,
    dx: f64,
) -> Result<SaturationField> {
    let raw = saturation_raw(network, params, dx)?;
    let grid = if params.saturation_clamp {
        raw.map(|v| v.clamp(0.0, 1.0))?
    } else {
        raw
    };
    Ok(SaturationField { grid })
}

/// Reuss (isostress harmonic) average of the bulk moduli:
/// `K = 1 / ((1 - S)/K_s + S/K_g)`.
pub fn reuss_bulk(s: f64, k_g: f64, k_s: f64) -> f64 {
    1.0 / ((1.0 - s) / k_s + s / k_g)
}

/// Linear density mix: `rho = (1 - S) rho_s + S rho_g`.
pub fn mix_density(s: f64, rho_g: f64, rho_s: f64) -> f64 {
    (1.0 - s) * rho_s + s * rho_g
}

/// Compressional-wave velocity `sqrt((K + 4G/3) / rho)`.
pub fn p_velocity(k: f64, g: f64, rho: f64) -> f64 {
    ((k + 4.0 * g / 3.0) / rho).sqrt()
}

/// P-velocity at saturation `s` under the given constants.
fn vp_at(s: f64, params: &GasParams) -> f64 {
    let k = reuss_bulk(s, params.k_g, params.k_s);
    let rho = mix_density(s, params.rho_g, params.rho_s);
    p_velocity(k, params.g, rho)
}

/// Cellwise velocity factor `V_p(S) / V_p(0)`.
///
/// Exactly 1 where `S = 0`; monotone in `S` with the direction fixed by the
/// sign of `K_g - K_s` (no sign assumption is made here).
pub fn vp_factor(sat: &SaturationField, params: &GasParams) -> Result<VpFactorField> {
    params.validate()?;
    let vp0 = vp_at(0.0, params);
    let grid = sat.grid().map(|s| vp_at(s, params) / vp0)?;
    if let Some(idx) = grid.values().iter().position(|&f| f <= 0.0) {
        return Err(Error::NonFinite {
            index: idx,
            context: "velocity factor must be strictly positive".into(),
        });
    }
    Ok(VpFactorField { grid })
}

/// Apply the chimney factor to a background model:
/// `V_final = clamp(factor, 1 - cap, 1 + cap) * V_background`.
///
/// The cap bounds the relative perturbation so the result stays within
/// solver sanity bounds; violations report an error suggesting a smaller cap
/// or weaker gas parameters.
pub fn apply_chimney(
    background: &VelocityModel,
    factor: &VpFactorField,
    cap: f64,
) -> Result<VelocityModel> {
    if cap <= 0.0 {
        return Err(Error::Config(format!("cap must be positive, got {cap}")));
    }
    if !factor.grid().same_shape(background.grid()) {
        return Err(Error::ShapeMismatch(format!(
            "factor {}x{} does not match background {}x{}",
            factor.grid().nz(),
            factor.grid().nx(),
            background.grid().nz(),
            background.grid().nx()
        )));
    }
    let values: Vec<f64> = background
        .grid()
        .values()
        .iter()
        .zip(factor.grid().values())
        .map(|(&v, &f)| f.clamp(1.0 - cap, 1.0 + cap) * v)
        .collect();
    let grid = Grid2D::new(
        background.grid().nz(),
        background.grid().nx(),
        background.grid().dx(),
        values,
    )?;
    VelocityModel::new(grid).map_err(|e| match e {
        Error::VelocityBounds {
            found,
            min_allowed,
            max_allowed,
            ..
        } => Error::VelocityBounds {
            found,
            min_allowed,
            max_allowed,
            context: "; reduce the perturbation cap or weaken the gas parameters".into(),
        },
        other => other,
    })
}

/// Chimney mask: `S > threshold`, then square morphological dilation by
/// `dilation_cells`.
pub fn chimney_mask(
    sat: &SaturationField,
    mask_threshold: f64,
    dilation_cells: usize,
) -> Result<MaskGrid> {
    if !(mask_threshold > 0.0 && mask_threshold < 1.0) {
        return Err(Error::Config(format!(
            "mask_threshold must lie in (0, 1), got {mask_threshold}"
        )));
    }
    let grid = sat.grid();
    let (nz, nx) = (grid.nz(), grid.nx());
    let raw: Vec<bool> = grid.values().iter().map(|&s| s > mask_threshold).collect();
    if dilation_cells == 0 {
        return MaskGrid::new(nz, nx, grid.dx(), raw);
    }
    let d = dilation_cells as isize;
    let mut dilated = vec![false; nz * nx];
    for iz in 0..nz as isize {
        for ix in 0..nx as isize {
            if !raw[iz as usize * nx + ix as usize] {
                continue;
            }
            for zz in (iz - d).max(0)..=(iz + d).min(nz as isize - 1) {
                for xx in (ix - d).max(0)..=(ix + d).min(nx as isize - 1) {
                    dilated[zz as usize * nx + xx as usize] = true;
                }
            }
        }
    }
    MaskGrid::new(nz, nx, grid.dx(), dilated)
}
