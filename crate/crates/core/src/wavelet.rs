//! Ricker source wavelet.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Ricker wavelet value at time `tau` for a given peak frequency and delay:
/// `(1 - 2 pi^2 f^2 u^2) * exp(-pi^2 f^2 u^2)` with `u = tau - delay`.
/// Maximum value 1 at `u = 0`.
pub fn ricker(peak_frequency: f64, delay: f64, tau: f64) -> f64 {
    let u = tau - delay;
    let a = std::f64::consts::PI * std::f64::consts::PI * peak_frequency * peak_frequency * u * u;
    (1.0 - 2.0 * a) * (-a).exp()
}

/// A sampled source wavelet at the recording interval.
///
/// The solver never interpolates these samples: it re-evaluates the Ricker
/// formula at its internal time step. The sampled form exists for
/// persistence and for callers that want the source as data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceWavelet {
    pub peak_frequency: f64,
    pub delay: f64,
    pub amplitude: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl SourceWavelet {
    /// Sample a Ricker wavelet: `samples[k] = amplitude * ricker(f, delay, k*dt)`.
    pub fn ricker(
        peak_frequency: f64,
        delay: f64,
        amplitude: f64,
        dt: f64,
        n_samples: usize,
    ) -> Result<Self> {
        if peak_frequency <= 0.0 {
            return Err(Error::Config(format!(
                "wavelet peak frequency must be positive, got {peak_frequency}"
            )));
        }
        if dt <= 0.0 || n_samples == 0 {
            return Err(Error::Config(format!(
                "wavelet needs dt > 0 and at least one sample, got dt {dt}, n {n_samples}"
            )));
        }
        let samples = (0..n_samples)
            .map(|k| amplitude * ricker(peak_frequency, delay, k as f64 * dt))
            .collect();
        Ok(Self {
            peak_frequency,
            delay,
            amplitude,
            dt,
            samples,
        })
    }

    /// Evaluate the underlying continuous wavelet at an arbitrary time.
    pub fn at(&self, tau: f64) -> f64 {
        self.amplitude * ricker(self.peak_frequency, self.delay, tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_is_one_at_delay() {
        assert_eq!(ricker(15.0, 0.1, 0.1), 1.0);
    }

    #[test]
    fn zero_at_polynomial_root() {
        // u = 1/(pi f sqrt(2)) is a root of the polynomial factor
        let f = 15.0;
        let u = 1.0 / (std::f64::consts::PI * f * std::f64::consts::SQRT_2);
        assert!(ricker(f, 0.0, u).abs() < 1e-15);
        assert!(ricker(f, 0.0, -u).abs() < 1e-15);
    }

    #[test]
    fn matches_closed_form_at_15hz() {
        // direct evaluation of (1 - 2a) e^{-a}, a = pi^2 f^2 u^2, f=15, u=0.02
        let a = std::f64::consts::PI.powi(2) * 15.0f64.powi(2) * 0.02f64.powi(2);
        let expected = (1.0 - 2.0 * a) * (-a).exp();
        let got = ricker(15.0, 0.0, 0.02);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - (-0.3194)).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn sampled_wavelet_peaks_at_delay_sample() {
        let w = SourceWavelet::ricker(15.0, 0.1, 2.0, 0.004, 128).unwrap();
        let peak_idx = (0.1f64 / 0.004).round() as usize;
        assert_eq!(w.samples[peak_idx], 2.0);
        let max = w.samples.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 2.0);
        for (k, &s) in w.samples.iter().enumerate() {
            assert_eq!(s, 2.0 * ricker(15.0, 0.1, k as f64 * 0.004));
        }
    }
}
