//! Linearized (Born) forward modeling and reverse-time migration.
//!
//! `born_forward` maps a squared-slowness perturbation to scattered data by
//! solving the background wave equation twice in lockstep: once for the
//! incident field, once for the scattered field driven by
//! `-dm * d2(p_s)/dt2`. `backpropagate` injects recorded traces time-reversed
//! at the receiver cells with the same scaling as a point source and returns
//! the receiver wavefield re-reversed to forward time. Two imaging conditions
//! are provided: plain zero-lag cross-correlation (the dataset default) and
//! the exact Born adjoint kernel using `-d2(p_s)/dt2`.
//!
//! With the sponge disabled, (`born_forward`, `migrate` with the adjoint
//! condition) form an exact operator/adjoint pair under the physical inner
//! products (record_dt-weighted in data space, dx^2-weighted in model
//! space); the dense equality is asserted in the tests below. Time second
//! differences use zero extension at both ends (the field is at rest outside
//! the simulated window), which is what makes the pairing exact.

use rayon::prelude::*;

use crate::error::Error;
use crate::geometry::{AcquisitionGeometry, ShotGather};
use crate::grid::{Grid2D, VelocityModel};
use crate::solver::{propagate, SolverConfig, Stepper, WavefieldSnapshots};
use crate::wavelet::SourceWavelet;
use crate::Result;

/// Squared-slowness perturbation `dm` in s^2/m^2 on the interior grid.
/// The sponge padding region is implicitly zero.
#[derive(Debug, Clone)]
pub struct SlownessPerturbation {
    grid: Grid2D,
}

impl SlownessPerturbation {
    pub fn new(grid: Grid2D) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
}

/// Dimensionless reflectivity image on the interior grid.
#[derive(Debug, Clone)]
pub struct SeismicImage {
    grid: Grid2D,
}

impl SeismicImage {
    pub fn new(grid: Grid2D) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn into_grid(self) -> Grid2D {
        self.grid
    }
}

/// Which imaging condition `migrate` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagingCondition {
    /// Plain zero-lag cross-correlation of source and receiver wavefields.
    ZeroLag,
    /// Exact adjoint of the Born operator (second-time-derivative kernel).
    Adjoint,
}

/// Optional post-stack filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostFilter {
    None,
    /// Scale-free 5-point Laplacian; suppresses low-wavenumber backscatter.
    Laplacian,
}

fn reflect(i: isize, n: usize) -> usize {
    // symmetric reflection: -1 -> 0, n -> n-1
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Gaussian blur with standard deviation `sigma_cells`, separable, symmetric
/// reflection at edges, kernel truncated at 4 sigma and renormalized.
/// `sigma_cells = 0` returns the input unchanged.
pub fn smooth_velocity(model: &VelocityModel, sigma_cells: f64) -> Result<VelocityModel> {
    if sigma_cells < 0.0 {
        return Err(Error::Config(format!(
            "smoothing sigma must be non-negative, got {sigma_cells}"
        )));
    }
    if sigma_cells == 0.0 {
        return Ok(model.clone());
    }
    let grid = model.grid();
    let (nz, nx) = (grid.nz(), grid.nx());
    let radius = (4.0 * sigma_cells).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for k in -radius..=radius {
        kernel.push((-(k as f64 * k as f64) / (2.0 * sigma_cells * sigma_cells)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= norm;
    }

    let src = grid.values();
    let mut tmp = vec![0.0; nz * nx];
    for iz in 0..nz {
        for ix in 0..nx {
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                let xx = reflect(ix as isize + j as isize - radius, nx);
                acc += w * src[iz * nx + xx];
            }
            tmp[iz * nx + ix] = acc;
        }
    }
    // a normalized kernel keeps values within the input range up to
    // rounding; clamp so the convex-combination bound holds exactly
    let (lo, hi) = (model.min_velocity(), model.max_velocity());
    let mut out = vec![0.0; nz * nx];
    for iz in 0..nz {
        for ix in 0..nx {
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                let zz = reflect(iz as isize + j as isize - radius, nz);
                acc += w * tmp[zz * nx + ix];
            }
            out[iz * nx + ix] = acc.clamp(lo, hi);
        }
    }
    let smoothed = Grid2D::new(nz, nx, grid.dx(), out)?;
    VelocityModel::with_bounds(smoothed, (lo, hi))
}

/// Scattered data for one perturbation: one gather per source.
///
/// Solves the background equation for the incident field and, in lockstep,
/// the scattered-field equation driven by `-dm * d2(p_s)/dt2` (centered
/// second time differences over the internal steps, zero-extended at the
/// ends). Linear in `dm` by construction.
pub fn born_forward(
    background: &VelocityModel,
    dm: &SlownessPerturbation,
    geometry: &AcquisitionGeometry,
    wavelet: &SourceWavelet,
    config: &SolverConfig,
) -> Result<Vec<ShotGather>> {
    if !dm.grid().same_shape(background.grid()) {
        return Err(Error::ShapeMismatch(format!(
            "perturbation {}x{} does not match background {}x{}",
            dm.grid().nz(),
            dm.grid().nx(),
            background.grid().nz(),
            background.grid().nx()
        )));
    }
    geometry.validate(background.grid())?;
    (0..geometry.source_positions.len())
        .into_par_iter()
        .map(|s| born_forward_shot(background, dm, geometry, s, wavelet, config))
        .collect()
}

fn born_forward_shot(
    background: &VelocityModel,
    dm: &SlownessPerturbation,
    geometry: &AcquisitionGeometry,
    source_index: usize,
    wavelet: &SourceWavelet,
    config: &SolverConfig,
) -> Result<ShotGather> {
    let grid = background.grid();
    if (wavelet.dt - geometry.record_dt).abs() > 1e-12 {
        return Err(Error::Geometry(format!(
            "wavelet dt {} must equal record_dt {}",
            wavelet.dt, geometry.record_dt
        )));
    }
    let stepper = Stepper::new(background, geometry.record_dt, config)?;
    let (sz, sx) = geometry.source_positions[source_index];
    let src = stepper.snap(grid, sz, sx)?;
    let receivers: Vec<usize> = geometry
        .receiver_positions
        .iter()
        .map(|&(z, x)| stepper.snap(grid, z, x))
        .collect::<Result<_>>()?;

    let n_steps = geometry.n_steps;
    let n_int = stepper.nz * stepper.nx;
    let inv_dt2 = 1.0 / (stepper.dt * stepper.dt);
    let dm_vals = dm.grid().values();

    let mut ps_prev = stepper.alloc_field();
    let mut ps_cur = stepper.alloc_field();
    let mut ps_next = stepper.alloc_field();
    let mut sc_prev = stepper.alloc_field();
    let mut sc_cur = stepper.alloc_field();
    let mut sc_next = stepper.alloc_field();

    // interior copies of the incident field at creation time (before the
    // extra damping the previous-slot receives), for the time derivative
    let mut ring: [Vec<f64>; 3] = [vec![0.0; n_int], vec![0.0; n_int], vec![0.0; n_int]];
    let mut rhs = vec![0.0; n_int];
    let mut traces = vec![0.0; receivers.len() * n_steps];

    let total_internal = n_steps * stepper.sub;
    for k in 0..total_internal {
        // incident field: plain propagation
        stepper.step(&ps_prev, &ps_cur, &mut ps_next);
        stepper.inject_point(&mut ps_next, src, wavelet.at(k as f64 * stepper.dt));
        stepper.damp(&mut ps_cur, &mut ps_next);

        // ring slots: [0] = p_s at k-1, [1] = at k, [2] = at k+1
        ring.rotate_left(1);
        ring[2] = stepper.extract_interior(&ps_next);
        for i in 0..n_int {
            rhs[i] = -dm_vals[i] * (ring[2][i] - 2.0 * ring[1][i] + ring[0][i]) * inv_dt2;
        }

        // scattered field driven by the Born source
        stepper.step(&sc_prev, &sc_cur, &mut sc_next);
        stepper.inject_interior_rhs(&mut sc_next, &rhs);
        stepper.damp(&mut sc_cur, &mut sc_next);

        rotate(&mut ps_prev, &mut ps_cur, &mut ps_next);
        rotate(&mut sc_prev, &mut sc_cur, &mut sc_next);

        if (k + 1) % stepper.sub == 0 {
            let record_step = (k + 1) / stepper.sub - 1;
            stepper.check_stable(&sc_cur, k + 1)?;
            for (r, &cell) in receivers.iter().enumerate() {
                traces[r * n_steps + record_step] = sc_cur[cell];
            }
        }
    }
    ShotGather::new(
        source_index,
        geometry.record_dt,
        receivers.len(),
        n_steps,
        traces,
    )
}

fn rotate(prev: &mut Vec<f64>, cur: &mut Vec<f64>, next: &mut Vec<f64>) {
    std::mem::swap(prev, cur);
    std::mem::swap(cur, next);
}

/// Back-propagate one recorded gather through the background model.
///
/// Each trace is injected time-reversed at its receiver cell with the same
/// point-source scaling as `propagate` (trace values between record samples
/// are linearly interpolated when the solver substeps). The returned
/// snapshots are re-reversed so `frames[k]` corresponds to forward time
/// `k * record_dt`; the final frame (forward time `n_steps * record_dt`) is
/// the all-zero initial state of the reversed run.
pub fn backpropagate(
    background: &VelocityModel,
    gather: &ShotGather,
    geometry: &AcquisitionGeometry,
    config: &SolverConfig,
) -> Result<WavefieldSnapshots> {
    let grid = background.grid();
    geometry.validate(grid)?;
    if gather.n_receivers() != geometry.receiver_positions.len()
        || gather.n_steps() != geometry.n_steps
    {
        return Err(Error::ShapeMismatch(format!(
            "gather {}x{} does not match geometry {} receivers x {} steps",
            gather.n_receivers(),
            gather.n_steps(),
            geometry.receiver_positions.len(),
            geometry.n_steps
        )));
    }
    let stepper = Stepper::new(background, geometry.record_dt, config)?;
    let receivers: Vec<usize> = geometry
        .receiver_positions
        .iter()
        .map(|&(z, x)| stepper.snap(grid, z, x))
        .collect::<Result<_>>()?;

    let n_steps = geometry.n_steps;
    let n_int = stepper.nz * stepper.nx;
    let total_internal = n_steps * stepper.sub;
    let sub = stepper.sub;

    // trace value at internal time index m (tau = m * dt), linear between
    // record samples; the tau = 0 sample is the zero initial state
    let sample_at = |trace: &[f64], m: usize| -> f64 {
        debug_assert!(m <= total_internal);
        if m == 0 {
            return 0.0;
        }
        let j = m / sub;
        let rem = m % sub;
        if rem == 0 {
            return trace[j - 1];
        }
        let lo = if j == 0 { 0.0 } else { trace[j - 1] };
        let hi = trace[j];
        lo + (rem as f64 / sub as f64) * (hi - lo)
    };

    let mut frames: Vec<Vec<f64>> = vec![Vec::new(); n_steps + 1];
    frames[n_steps] = vec![0.0; n_int];

    let mut prev = stepper.alloc_field();
    let mut cur = stepper.alloc_field();
    let mut next = stepper.alloc_field();

    for m in 0..total_internal {
        stepper.step(&prev, &cur, &mut next);
        // update m of the reversed run carries the data sample at internal
        // index (total - m); at m = 0 that is the final recorded sample
        let data_index = total_internal - m;
        for (r, &cell) in receivers.iter().enumerate() {
            let value = sample_at(gather.trace(r), data_index);
            stepper.inject_point(&mut next, cell, value);
        }
        stepper.damp(&mut cur, &mut next);
        rotate(&mut prev, &mut cur, &mut next);

        // reversed internal index of the freshly computed state
        let reversed = m + 1;
        let remaining = total_internal - reversed;
        if remaining % sub == 0 {
            let j = remaining / sub;
            stepper.check_stable(&cur, reversed)?;
            frames[j] = stepper.extract_interior(&cur);
        }
    }

    Ok(WavefieldSnapshots {
        nz: stepper.nz,
        nx: stepper.nx,
        dx: stepper.dx,
        record_dt: geometry.record_dt,
        frames,
    })
}

fn check_aligned(source: &WavefieldSnapshots, receiver: &WavefieldSnapshots) -> Result<()> {
    if source.nz != receiver.nz
        || source.nx != receiver.nx
        || source.frames.len() != receiver.frames.len()
    {
        return Err(Error::ShapeMismatch(format!(
            "snapshot sequences differ: {}x{} x {} frames vs {}x{} x {} frames",
            source.nz,
            source.nx,
            source.frames.len(),
            receiver.nz,
            receiver.nx,
            receiver.frames.len()
        )));
    }
    Ok(())
}

/// Zero-lag cross-correlation imaging condition:
/// `I(x) = sum_k p_s(x, k) p_r(x, k) record_dt`.
pub fn image_zero_lag(
    source: &WavefieldSnapshots,
    receiver: &WavefieldSnapshots,
    record_dt: f64,
) -> Result<SeismicImage> {
    check_aligned(source, receiver)?;
    let n = source.nz * source.nx;
    let mut image = vec![0.0; n];
    for (s, r) in source.frames.iter().zip(&receiver.frames) {
        for i in 0..n {
            image[i] += s[i] * r[i] * record_dt;
        }
    }
    Ok(SeismicImage::new(Grid2D::new(
        source.nz, source.nx, source.dx, image,
    )?))
}

/// Born-adjoint imaging condition:
/// `I(x) = -sum_k d2(p_s)/dt2 (x, k) p_r(x, k) record_dt`, with centered
/// second differences zero-extended at both ends.
pub fn image_adjoint(
    source: &WavefieldSnapshots,
    receiver: &WavefieldSnapshots,
    record_dt: f64,
) -> Result<SeismicImage> {
    check_aligned(source, receiver)?;
    let n = source.nz * source.nx;
    let n_frames = source.frames.len();
    let inv_dt2 = 1.0 / (record_dt * record_dt);
    let mut image = vec![0.0; n];
    for k in 0..n_frames {
        let r = &receiver.frames[k];
        let s_cur = &source.frames[k];
        let s_prev = k.checked_sub(1).map(|j| &source.frames[j]);
        let s_next = source.frames.get(k + 1);
        for i in 0..n {
            let prev = s_prev.map_or(0.0, |f| f[i]);
            let next = s_next.map_or(0.0, |f| f[i]);
            let dtt = (next - 2.0 * s_cur[i] + prev) * inv_dt2;
            image[i] -= dtt * r[i] * record_dt;
        }
    }
    Ok(SeismicImage::new(Grid2D::new(
        source.nz, source.nx, source.dx, image,
    )?))
}

/// Migrate a set of gathers: per shot, recompute the source wavefield,
/// back-propagate the data, apply the imaging condition; stack over shots.
///
/// `migration_velocity` is the smooth background (callers apply
/// [`smooth_velocity`] first). Shots run in parallel; the stack is summed in
/// source order, so the result is independent of thread count.
pub fn migrate(
    migration_velocity: &VelocityModel,
    gathers: &[ShotGather],
    geometry: &AcquisitionGeometry,
    wavelet: &SourceWavelet,
    config: &SolverConfig,
    imaging: ImagingCondition,
    postfilter: PostFilter,
) -> Result<SeismicImage> {
    let grid = migration_velocity.grid();
    if gathers.is_empty() {
        return Err(Error::ShapeMismatch(
            "migrate needs at least one gather".into(),
        ));
    }
    let snap_config = config.clone().with_snapshots(true);
    let per_shot: Vec<Grid2D> = gathers
        .par_iter()
        .map(|gather| -> Result<Grid2D> {
            let (_, snaps) = propagate(
                migration_velocity,
                geometry,
                gather.source_index,
                wavelet,
                &snap_config,
            )?;
            let source_snaps = snaps.expect("snapshots requested");
            let receiver_snaps = backpropagate(migration_velocity, gather, geometry, config)?;
            let image = match imaging {
                ImagingCondition::ZeroLag => {
                    image_zero_lag(&source_snaps, &receiver_snaps, geometry.record_dt)?
                }
                ImagingCondition::Adjoint => {
                    image_adjoint(&source_snaps, &receiver_snaps, geometry.record_dt)?
                }
            };
            Ok(image.into_grid())
        })
        .collect::<Result<_>>()?;

    let n = grid.nz() * grid.nx();
    let mut stack = vec![0.0; n];
    for shot_image in &per_shot {
        for (acc, v) in stack.iter_mut().zip(shot_image.values()) {
            *acc += v;
        }
    }
    let stacked = match postfilter {
        PostFilter::None => stack,
        PostFilter::Laplacian => laplacian_filter(&stack, grid.nz(), grid.nx()),
    };
    Ok(SeismicImage::new(Grid2D::new(
        grid.nz(),
        grid.nx(),
        grid.dx(),
        stacked,
    )?))
}

/// Scale-free 5-point negative Laplacian (zero beyond edges).
fn laplacian_filter(values: &[f64], nz: usize, nx: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let at = |iz: isize, ix: isize| -> f64 {
        if iz < 0 || ix < 0 || iz >= nz as isize || ix >= nx as isize {
            0.0
        } else {
            values[iz as usize * nx + ix as usize]
        }
    };
    for iz in 0..nz as isize {
        for ix in 0..nx as isize {
            out[iz as usize * nx + ix as usize] =
                4.0 * at(iz, ix) - at(iz - 1, ix) - at(iz + 1, ix) - at(iz, ix - 1) - at(iz, ix + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_model(nz: usize, nx: usize, dx: f64, v: f64) -> VelocityModel {
        VelocityModel::new(Grid2D::constant(nz, nx, dx, v).unwrap()).unwrap()
    }

    fn no_sponge_config() -> SolverConfig {
        SolverConfig {
            boundary_width: 0,
            boundary_strength: 0.0,
            store_snapshots: false,
            ..SolverConfig::default()
        }
    }

    // small fixture where record_dt is below the CFL bound (no substepping)
    fn tiny_fixture() -> (
        VelocityModel,
        AcquisitionGeometry,
        SourceWavelet,
        SolverConfig,
    ) {
        let model = constant_model(6, 5, 10.0, 1000.0);
        let geometry = AcquisitionGeometry {
            source_positions: vec![(20.0, 20.0)],
            receiver_positions: vec![(0.0, 10.0), (0.0, 30.0)],
            record_dt: 0.004,
            n_steps: 8,
        };
        let wavelet = SourceWavelet::ricker(25.0, 0.012, 1.0, 0.004, 8).unwrap();
        (model, geometry, wavelet, no_sponge_config())
    }

    #[test]
    fn smooth_velocity_identity_and_bounds() {
        let grid = Grid2D::new(
            8,
            8,
            4.0,
            (0..64).map(|i| 1500.0 + 10.0 * (i % 7) as f64).collect(),
        )
        .unwrap();
        let model = VelocityModel::new(grid).unwrap();
        let same = smooth_velocity(&model, 0.0).unwrap();
        assert_eq!(same.grid().values(), model.grid().values());

        let constant = constant_model(8, 8, 4.0, 2000.0);
        let blurred = smooth_velocity(&constant, 3.0).unwrap();
        for &v in blurred.grid().values() {
            assert!((v - 2000.0).abs() < 1e-9);
        }

        let smoothed = smooth_velocity(&model, 2.0).unwrap();
        assert!(smoothed.min_velocity() >= model.min_velocity() - 1e-9);
        assert!(smoothed.max_velocity() <= model.max_velocity() + 1e-9);
    }

    #[test]
    fn zero_perturbation_gives_zero_scattered_data() {
        let (model, geometry, wavelet, config) = tiny_fixture();
        let dm = SlownessPerturbation::new(Grid2D::constant(6, 5, 10.0, 0.0).unwrap());
        let gathers = born_forward(&model, &dm, &geometry, &wavelet, &config).unwrap();
        assert!(gathers[0].traces().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn born_is_linear_in_the_perturbation() {
        let (model, geometry, wavelet, config) = tiny_fixture();
        let mut values = vec![0.0; 30];
        values[2 * 5 + 2] = 1.0e-8;
        values[3 * 5 + 1] = -4.0e-9;
        let dm1 = SlownessPerturbation::new(Grid2D::new(6, 5, 10.0, values.clone()).unwrap());
        let dm2 = SlownessPerturbation::new(
            Grid2D::new(6, 5, 10.0, values.iter().map(|v| 2.0 * v).collect()).unwrap(),
        );
        let g1 = born_forward(&model, &dm1, &geometry, &wavelet, &config).unwrap();
        let g2 = born_forward(&model, &dm2, &geometry, &wavelet, &config).unwrap();
        for (a, b) in g1[0].traces().iter().zip(g2[0].traces()) {
            assert_eq!(2.0 * a, *b);
        }
        assert!(g1[0].traces().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn backpropagate_is_linear_in_the_data() {
        let (model, geometry, _, config) = tiny_fixture();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 2 * 8;
        let d1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
        let mk = |t: Vec<f64>| ShotGather::new(0, 0.004, 2, 8, t).unwrap();
        let r1 = backpropagate(&model, &mk(d1), &geometry, &config).unwrap();
        let r2 = backpropagate(&model, &mk(d2), &geometry, &config).unwrap();
        let rs = backpropagate(&model, &mk(sum), &geometry, &config).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for k in 0..r1.frames.len() {
            for i in 0..r1.frames[k].len() {
                let lin = r1.frames[k][i] + r2.frames[k][i];
                num += (rs.frames[k][i] - lin).powi(2);
                den += lin * lin;
            }
        }
        assert!(num.sqrt() <= 1e-6 * den.sqrt().max(1e-300));
    }

    #[test]
    fn zero_gather_backpropagates_to_zero() {
        let (model, geometry, _, config) = tiny_fixture();
        let zero = ShotGather::zeros(0, 0.004, 2, 8);
        let snaps = backpropagate(&model, &zero, &geometry, &config).unwrap();
        for f in &snaps.frames {
            assert!(f.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn first_reversed_step_energy_confined_to_receiver_cells() {
        let (model, geometry, _, config) = tiny_fixture();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let traces: Vec<f64> = (0..16).map(|_| rng.gen_range(0.5..1.0)).collect();
        let gather = ShotGather::new(0, 0.004, 2, 8, traces).unwrap();
        let snaps = backpropagate(&model, &gather, &geometry, &config).unwrap();
        // with no substepping, the first reversed update lands at forward
        // index n_steps - 1; its support is exactly the receiver cells
        let frame = &snaps.frames[7];
        let nx = 5;
        let receiver_cells = [1, 3];
        let _ = nx;
        for (i, &v) in frame.iter().enumerate() {
            if receiver_cells.contains(&i) {
                assert!(v != 0.0);
            } else {
                assert_eq!(v, 0.0, "unexpected energy at cell {i}");
            }
        }
    }

    #[test]
    fn imaging_conditions_on_degenerate_inputs() {
        let mk = |frames: Vec<Vec<f64>>| WavefieldSnapshots {
            nz: 2,
            nx: 2,
            dx: 1.0,
            record_dt: 0.01,
            frames,
        };
        // single nonzero snapshot pair: image = record_dt at that cell
        let s = mk(vec![vec![0.0; 4], vec![0.0, 1.0, 0.0, 0.0]]);
        let r = mk(vec![vec![0.0; 4], vec![0.0, 1.0, 0.0, 0.0]]);
        let img = image_zero_lag(&s, &r, 0.01).unwrap();
        assert_eq!(img.grid().values(), &[0.0, 0.01, 0.0, 0.0]);

        // all-zero receiver field: zero image under both conditions
        let rz = mk(vec![vec![0.0; 4], vec![0.0; 4]]);
        assert!(image_zero_lag(&s, &rz, 0.01)
            .unwrap()
            .grid()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert!(image_adjoint(&s, &rz, 0.01)
            .unwrap()
            .grid()
            .values()
            .iter()
            .all(|&v| v == 0.0));

        // scaling the receiver field scales the image (bilinearity)
        let r2 = mk(vec![vec![0.0; 4], vec![0.0, 3.0, 0.0, 0.0]]);
        let img2 = image_zero_lag(&s, &r2, 0.01).unwrap();
        assert_eq!(img2.grid().values()[1], 3.0 * img.grid().values()[1]);
    }

    #[test]
    fn adjoint_kernel_vanishes_for_time_constant_source_field() {
        // centered second difference of a time-constant field is zero at
        // interior steps; pair it with a receiver field supported there
        let frames: Vec<Vec<f64>> = (0..6).map(|_| vec![2.0; 4]).collect();
        let s = WavefieldSnapshots {
            nz: 2,
            nx: 2,
            dx: 1.0,
            record_dt: 0.01,
            frames,
        };
        let mut r_frames: Vec<Vec<f64>> = (0..6).map(|_| vec![0.0; 4]).collect();
        r_frames[3] = vec![1.0; 4];
        let r = WavefieldSnapshots {
            nz: 2,
            nx: 2,
            dx: 1.0,
            record_dt: 0.01,
            frames: r_frames,
        };
        let img = image_adjoint(&s, &r, 0.01).unwrap();
        for &v in img.grid().values() {
            assert!(v.abs() < 1e-12);
        }
    }

    /// Dense operator check: with the sponge off, `born_forward` and
    /// `migrate(Adjoint)` are exact transposes under record_dt-weighted data
    /// and dx^2-weighted model inner products.
    #[test]
    fn born_and_adjoint_migration_are_exact_transposes() {
        let (model, geometry, wavelet, config) = tiny_fixture();
        let (nz, nx, dx) = (6usize, 5usize, 10.0f64);
        let n_model = nz * nx;
        let n_data = 2 * 8;
        let record_dt = geometry.record_dt;

        let mut forward = vec![vec![0.0; n_model]; n_data]; // L[j][i]
        for i in 0..n_model {
            let mut values = vec![0.0; n_model];
            values[i] = 1.0;
            let dm = SlownessPerturbation::new(Grid2D::new(nz, nx, dx, values).unwrap());
            let g = born_forward(&model, &dm, &geometry, &wavelet, &config).unwrap();
            for (j, &v) in g[0].traces().iter().enumerate() {
                forward[j][i] = v;
            }
        }

        let mut adjoint = vec![vec![0.0; n_data]; n_model]; // Lt[i][j]
        for j in 0..n_data {
            let mut traces = vec![0.0; n_data];
            traces[j] = 1.0;
            let gather = ShotGather::new(0, record_dt, 2, 8, traces).unwrap();
            let image = migrate(
                &model,
                &[gather],
                &geometry,
                &wavelet,
                &config,
                ImagingCondition::Adjoint,
                PostFilter::None,
            )
            .unwrap();
            for (i, &v) in image.grid().values().iter().enumerate() {
                adjoint[i][j] = v;
            }
        }

        // weighted transpose equality: L[j][i] * record_dt = Lt[i][j] * dx^2
        let mut max_abs = 0.0f64;
        for j in 0..n_data {
            for i in 0..n_model {
                max_abs = max_abs.max((forward[j][i] * record_dt).abs());
            }
        }
        assert!(max_abs > 0.0);
        for j in 0..n_data {
            for i in 0..n_model {
                let lhs = forward[j][i] * record_dt;
                let rhs = adjoint[i][j] * dx * dx;
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * max_abs,
                    "transpose mismatch at data {j}, model {i}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn shot_stack_equals_sum_of_single_shot_migrations() {
        let model = constant_model(12, 12, 10.0, 1000.0);
        let geometry = AcquisitionGeometry {
            source_positions: vec![(20.0, 30.0), (20.0, 80.0)],
            receiver_positions: vec![(0.0, 20.0), (0.0, 60.0), (0.0, 100.0)],
            record_dt: 0.004,
            n_steps: 12,
        };
        let wavelet = SourceWavelet::ricker(25.0, 0.02, 1.0, 0.004, 12).unwrap();
        let config = no_sponge_config();
        let mut values = vec![0.0; 144];
        values[6 * 12 + 6] = 1.0e-8;
        let dm = SlownessPerturbation::new(Grid2D::new(12, 12, 10.0, values).unwrap());
        let gathers = born_forward(&model, &dm, &geometry, &wavelet, &config).unwrap();

        let run = |gs: &[ShotGather]| {
            migrate(
                &model,
                gs,
                &geometry,
                &wavelet,
                &config,
                ImagingCondition::ZeroLag,
                PostFilter::None,
            )
            .unwrap()
        };
        let stacked = run(&gathers);
        let single0 = run(&gathers[0..1]);
        let single1 = run(&gathers[1..2]);
        let norm: f64 = stacked
            .grid()
            .values()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        for i in 0..144 {
            let sum = single0.grid().values()[i] + single1.grid().values()[i];
            assert!((stacked.grid().values()[i] - sum).abs() <= 1e-6 * norm.max(1e-300));
        }
    }
}
