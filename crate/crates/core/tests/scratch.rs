//! Temporary diagnostics while tuning fixtures. Removed before release.

use synthseis_core::geometry::AcquisitionGeometry;
use synthseis_core::grid::{Grid2D, VelocityModel};
use synthseis_core::solver::{propagate, SolverConfig};
use synthseis_core::wavelet::{ricker, SourceWavelet};

/// Analytic 2D free-space solution for (1/v^2) p_tt - lap p = w(t) delta(x):
/// p(r, t) = v^2/(2 pi) * int_0^sqrt(t^2-a^2) w(t - sqrt(u^2+a^2)) / sqrt(u^2+a^2) du
/// with a = r/v, by Simpson quadrature after the singularity-removing substitution.
fn analytic_trace(f: f64, delay: f64, v: f64, r: f64, times: &[f64]) -> Vec<f64> {
    let a = r / v;
    times
        .iter()
        .map(|&t| {
            if t <= a {
                return 0.0;
            }
            let umax = (t * t - a * a).sqrt();
            let n = 4000;
            let h = umax / n as f64;
            let integrand = |u: f64| {
                let s = (u * u + a * a).sqrt();
                ricker(f, delay, t - s) / s
            };
            let mut acc = integrand(0.0) + integrand(umax);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * integrand(i as f64 * h);
            }
            acc * h / (3.0 * 2.0 * std::f64::consts::PI)
        })
        .collect()
}

fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn first_cross(series: &[f64], dt: f64, eta: f64) -> f64 {
    let peak = series.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for (i, &v) in series.iter().enumerate() {
        if v.abs() >= eta * peak {
            return i as f64 * dt;
        }
    }
    f64::NAN
}

#[test]
fn analytic_oracle_diagnostics() {
    let v = 2000.0;
    let model = VelocityModel::new(Grid2D::constant(128, 224, 4.0, v).unwrap()).unwrap();
    let record_dt = 0.004;
    let n_steps = 128;
    let geometry = AcquisitionGeometry {
        source_positions: vec![(256.0, 200.0)],
        receiver_positions: vec![(256.0, 600.0)],
        record_dt,
        n_steps,
    };
    let f = 15.0;
    let delay = 0.1;
    let wavelet = SourceWavelet::ricker(f, delay, 1.0, record_dt, n_steps).unwrap();
    let config = SolverConfig {
        boundary_width: 40,
        boundary_strength: 0.2,
        ..SolverConfig::default()
    };
    let t0 = std::time::Instant::now();
    let (gather, _) = propagate(&model, &geometry, 0, &wavelet, &config).unwrap();
    println!("propagate took {:?}", t0.elapsed());

    let times: Vec<f64> = (1..=n_steps).map(|k| k as f64 * record_dt).collect();
    let r = 400.0;
    let ana = analytic_trace(f, delay, v, r, &times);
    let sim = gather.trace(0);

    let c = ncc(sim, &ana);
    println!("ncc = {c}");

    // first-break via threshold crossing, compensated by the wavelet's own onset
    for eta in [0.01, 0.02, 0.05, 0.1] {
        let w_onset = first_cross(&wavelet.samples, record_dt, eta);
        let tb_sim = first_cross(sim, record_dt, eta) - w_onset;
        let tb_ana = first_cross(&ana, record_dt, eta) - w_onset;
        println!(
            "eta={eta}: travel(sim)={tb_sim:.4} travel(ana)={tb_ana:.4} true={}",
            r / v
        );
    }

    // amplitude comparison (checks source scaling)
    let max_sim = sim.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let max_ana = ana.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    println!("max_sim={max_sim:.6e} max_ana={max_ana:.6e} ratio={}", max_sim / max_ana);

    let l2_err: f64 = sim
        .iter()
        .zip(&ana)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        / ana.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("relative L2 error = {l2_err}");
}

mod desk {
    use std::time::Instant;
    use synthseis_core::config::PipelineConfig;
    use synthseis_core::pipeline::{generate_sample, masked_mean_abs_diff};
    use synthseis_core::synth::layered_model;

    fn desk_config() -> PipelineConfig {
        let toml_text = r#"
[grid]
dx_m = 4.0

[solver]
spatial_order = 4
boundary_width = 40
cfl_safety = 0.9

[geometry]
n_sources = 5
source_spacing_m = 80.0
n_receivers = 40
receiver_spacing_m = 12.0
record_dt_s = 0.004
n_steps = 200

[wavelet]
peak_frequency_hz = 25.0

[gas]
l_eff_m = 8.0

[fracture]
n_seeds = 2
max_length_cells = 30
max_angle_deg = 15.0

[migration]
smoothing_sigma_cells = 10.0
"#;
        toml::from_str(toml_text).unwrap()
    }

    #[test]
    fn desk_sample_diagnostics() {
        let mut config = desk_config();
        config.fracture.max_length_cells = 12;
        config.fracture.n_seeds = 2;
        config.gas.l_eff_m = Some(6.0);
        config.gas.mask_dilation_cells = 3;
        config.wavelet.peak_frequency_hz = 30.0;
        for seed in 0..10u64 {
            let model = layered_model(128, 128, 4.0, 100 + seed).unwrap();
            let t0 = Instant::now();
            let pair = generate_sample(&model, "m", 0, &config, seed * 31 + 7).unwrap();
            let elapsed = t0.elapsed();
            let mask_frac = pair.mask.count() as f64 / (128.0 * 128.0);
            let (inside, outside) =
                masked_mean_abs_diff(pair.degraded.grid(), pair.clean.grid(), &pair.mask).unwrap();
            let sat_max = pair.saturation.grid().max();
            let vf_ratio = pair
                .v_final
                .grid()
                .values()
                .iter()
                .zip(pair.v_background.grid().values())
                .map(|(a, b)| a / b)
                .fold(f64::MIN, f64::max);
            println!(
                "seed {seed}: {elapsed:?} mask={mask_frac:.3} inside={inside:.3e} outside={outside:.3e} ratio={:.2} sat_max={sat_max} vf_max_ratio={vf_ratio:.3} cells={}",
                inside / outside,
                pair.fractures.cells.len(),
            );
        }
    }
}
