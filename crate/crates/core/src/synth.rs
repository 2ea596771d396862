//! Synthetic layered velocity models for fixtures and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid2D, VelocityModel};
use crate::Result;

/// Deterministic layered velocity model: velocity increases with depth
/// through a handful of layers whose interfaces undulate gently across the
/// section. Values stay within [1500, 3500] m/s.
pub fn layered_model(nz: usize, nx: usize, dx: f64, seed: u64) -> Result<VelocityModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = rng.gen_range(4..8usize);

    // interface depths as fractions of nz, sorted and separated
    let mut depths: Vec<f64> = (0..n_layers - 1)
        .map(|_| rng.gen_range(0.1..0.95))
        .collect();
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // layer velocities increase with depth with some jitter
    let mut velocities = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let base = 1500.0 + 2000.0 * i as f64 / (n_layers - 1) as f64;
        velocities.push((base + rng.gen_range(-150.0..150.0)).clamp(1500.0, 3500.0));
    }

    // per-interface undulation: amplitude in cells and lateral wavelength
    let undulations: Vec<(f64, f64, f64)> = depths
        .iter()
        .map(|_| {
            (
                rng.gen_range(0.0..4.0),
                rng.gen_range(0.8..2.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();

    let mut values = vec![0.0; nz * nx];
    for ix in 0..nx {
        let u = ix as f64 / nx as f64;
        for iz in 0..nz {
            let mut layer = 0;
            for (k, &frac) in depths.iter().enumerate() {
                let (amp, freq, phase) = undulations[k];
                let boundary =
                    frac * nz as f64 + amp * (std::f64::consts::TAU * freq * u + phase).sin();
                if (iz as f64) >= boundary {
                    layer = k + 1;
                }
            }
            values[iz * nx + ix] = velocities[layer];
        }
    }
    VelocityModel::new(Grid2D::new(nz, nx, dx, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layered_model_is_deterministic_and_bounded() {
        let a = layered_model(64, 64, 4.0, 5).unwrap();
        let b = layered_model(64, 64, 4.0, 5).unwrap();
        assert_eq!(a.grid().values(), b.grid().values());
        assert!(a.min_velocity() >= 1500.0);
        assert!(a.max_velocity() <= 3500.0);
        let c = layered_model(64, 64, 4.0, 6).unwrap();
        assert_ne!(a.grid().values(), c.grid().values());
    }

    #[test]
    fn velocity_generally_increases_with_depth() {
        let m = layered_model(128, 32, 4.0, 11).unwrap();
        let top = m.grid().get(2, 16);
        let bottom = m.grid().get(125, 16);
        assert!(bottom > top);
    }
}
