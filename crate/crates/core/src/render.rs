//! Grayscale rendering of grids for quick inspection.

use crate::error::Error;
use crate::grid::{Grid2D, MaskGrid};
use crate::Result;

/// Percentile of `values` with linear interpolation between order statistics.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Render a grid to an 8-bit grayscale binary PGM (P5).
///
/// Values are clipped to the [`percentile_lo`, `percentile_hi`] percentiles
/// and mapped linearly to 0..255. Constant grids (or degenerate percentile
/// ranges) map to mid-gray 128.
pub fn render_grid(grid: &Grid2D, percentile_lo: f64, percentile_hi: f64) -> Result<Vec<u8>> {
    if !(0.0..=100.0).contains(&percentile_lo)
        || !(0.0..=100.0).contains(&percentile_hi)
        || percentile_lo >= percentile_hi
    {
        return Err(Error::Config(format!(
            "percentiles must satisfy 0 <= lo < hi <= 100, got ({percentile_lo}, {percentile_hi})"
        )));
    }
    let mut sorted = grid.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("grid values are finite"));
    let lo = percentile(&sorted, percentile_lo);
    let hi = percentile(&sorted, percentile_hi);
    let range = hi - lo;

    let mut out = pgm_header(grid.nx(), grid.nz());
    if range <= 0.0 {
        out.extend(std::iter::repeat(128u8).take(grid.len()));
        return Ok(out);
    }
    for &v in grid.values() {
        let t = ((v - lo) / range).clamp(0.0, 1.0);
        out.push((t * 255.0).round() as u8);
    }
    Ok(out)
}

/// Render a mask to a PGM: set cells white, clear cells black.
pub fn render_mask(mask: &MaskGrid) -> Vec<u8> {
    let mut out = pgm_header(mask.nx(), mask.nz());
    out.extend(mask.values().iter().map(|&b| if b { 255u8 } else { 0u8 }));
    out
}

fn pgm_header(width: usize, height: usize) -> Vec<u8> {
    format!("P5\n{width} {height}\n255\n").into_bytes()
}

/// Fraction of values clipped outside the given percentile window.
/// Exposed for tests and reporting.
pub fn clipped_fraction(grid: &Grid2D, percentile_lo: f64, percentile_hi: f64) -> f64 {
    let mut sorted = grid.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("grid values are finite"));
    let lo = percentile(&sorted, percentile_lo);
    let hi = percentile(&sorted, percentile_hi);
    let clipped = grid.values().iter().filter(|&&v| v < lo || v > hi).count();
    clipped as f64 / grid.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn pixels(bytes: &[u8]) -> &[u8] {
        // header is "P5\n<w> <h>\n255\n"
        let mut newlines = 0;
        for (i, &b) in bytes.iter().enumerate() {
            if b == b'\n' {
                newlines += 1;
                if newlines == 3 {
                    return &bytes[i + 1..];
                }
            }
        }
        panic!("malformed pgm header");
    }

    #[test]
    fn constant_grid_maps_to_mid_gray() {
        let g = Grid2D::constant(3, 3, 1.0, 7.25).unwrap();
        let img = render_grid(&g, 0.0, 100.0).unwrap();
        assert!(img.starts_with(b"P5\n3 3\n255\n"));
        assert!(pixels(&img).iter().all(|&p| p == 128));
    }

    #[test]
    fn two_valued_grid_hits_endpoints() {
        let g = Grid2D::new(1, 4, 1.0, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let img = render_grid(&g, 0.0, 100.0).unwrap();
        assert_eq!(pixels(&img), &[0, 255, 0, 255]);
    }

    #[test]
    fn clipped_fraction_bounded_by_percentile_window() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = Grid2D::new(100, 100, 1.0, values).unwrap();
        let frac = clipped_fraction(&g, 1.0, 99.0);
        assert!(frac <= 0.02, "clipped fraction {frac} exceeds 2%");
        assert!(frac > 0.0);
    }

    #[test]
    fn rejects_bad_percentiles() {
        let g = Grid2D::constant(2, 2, 1.0, 0.0).unwrap();
        assert!(render_grid(&g, 50.0, 50.0).is_err());
        assert!(render_grid(&g, -1.0, 99.0).is_err());
        assert!(render_grid(&g, 1.0, 101.0).is_err());
    }
}
