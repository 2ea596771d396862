//! End-to-end dataset orchestration: deterministic sample generation,
//! train/test splitting, evaluation runs, and the on-disk layout.
//!
//! One sample couples a clean migrated image with a gas-degraded one. Both
//! surveys are migrated with the same smoothed clean background, so the
//! degraded image differs only through wave-physics distortion in the
//! forward modeling, never through migration-velocity knowledge of the gas.
//!
//! Layout per sample: `<out>/<model_id>/<sample_id>/{clean,gas,v_bg,v_final,
//! vp_factor,saturation}.f32` with sidecars, `mask.u8`, `fractures.json`,
//! `meta.json`, and `preview/*.pgm`. `<out>/manifest.json` indexes the run.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chimney::{
    apply_chimney, chimney_mask, grow_fractures, saturation, vp_factor, FractureNetwork,
    FractureParams, GasParams, SaturationField, VpFactorField,
};
use crate::config::PipelineConfig;
use crate::error::Error;
use crate::geometry::AcquisitionGeometry;
use crate::grid::{Grid2D, MaskGrid, VelocityModel};
use crate::io::{read_grid, read_mask, write_grid, write_mask, GridKind};
use crate::metrics::{enh_scores, seg_scores, EnhScores, SegScores};
use crate::render::{render_grid, render_mask};
use crate::rtm::{migrate, smooth_velocity, SeismicImage};
use crate::solver::{simulate_survey, SolverConfig};
use crate::wavelet::SourceWavelet;
use crate::Result;

/// Stable per-sample seed: mixes the master seed, the model id, and the
/// sample index through FNV-1a and a splitmix64 finalizer. Independent of
/// scheduling and platform.
pub fn derive_seed(master_seed: u64, model_id: &str, sample_index: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in model_id.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut x = master_seed
        ^ h.rotate_left(17)
        ^ sample_index.wrapping_mul(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Everything needed to reproduce one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub model_id: String,
    pub sample_index: usize,
    pub rng_seed: u64,
    pub code_version: String,
    pub config_hash: String,
    pub nz: usize,
    pub nx: usize,
    pub dx_m: f64,
    pub solver: SolverConfig,
    pub geometry: AcquisitionGeometry,
    pub wavelet_peak_frequency_hz: f64,
    pub wavelet_delay_s: f64,
    pub wavelet_amplitude: f64,
    pub gas: GasParams,
    /// Resolved erfc length scale actually used, in meters.
    pub effective_diffusion_length_m: f64,
    pub fracture: FractureParams,
    pub mask_dilation_cells: usize,
    pub perturbation_cap: f64,
    pub migration_smoothing_sigma_cells: f64,
    pub imaging: crate::rtm::ImagingCondition,
    pub postfilter: crate::rtm::PostFilter,
}

/// One generated sample: the image pair, the velocity models, the chimney
/// fields, and the metadata record.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub degraded: SeismicImage,
    pub clean: SeismicImage,
    pub v_background: VelocityModel,
    pub v_final: VelocityModel,
    pub vp_factor: VpFactorField,
    pub saturation: SaturationField,
    pub mask: MaskGrid,
    pub fractures: FractureNetwork,
    pub meta: SampleMeta,
}

fn stage<T>(sample_id: &str, name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        sample_id: sample_id.to_string(),
        stage: name,
        source: Box::new(e),
    })
}

/// Generate one sample from a background model.
///
/// Stages: grow fractures, diffuse saturation, rock-physics factor, chimney
/// application, two surveys (clean and gas), migration of both with the
/// same smoothed clean background, mask extraction.
pub fn generate_sample(
    background: &VelocityModel,
    model_id: &str,
    sample_index: usize,
    config: &PipelineConfig,
    rng_seed: u64,
) -> Result<SamplePair> {
    let sample_id = format!("{model_id}_s{sample_index:03}");
    let grid = background.grid();
    let (nz, nx, dx) = (grid.nz(), grid.nx(), grid.dx());

    let solver: SolverConfig = stage(&sample_id, "config", config.solver.to_solver_config())?;
    let gas: GasParams = stage(&sample_id, "config", config.gas.to_gas_params())?;
    let fracture_params = stage(&sample_id, "config", config.fracture.to_params(rng_seed))?;
    let width_m = (nx - 1) as f64 * dx;
    let geometry = stage(&sample_id, "geometry", config.geometry.build(width_m))?;
    let wavelet: SourceWavelet = stage(
        &sample_id,
        "wavelet",
        config.wavelet.build(geometry.record_dt, geometry.n_steps),
    )?;

    let fractures = stage(
        &sample_id,
        "fractures",
        grow_fractures(nz, nx, dx, &fracture_params),
    )?;
    let sat = stage(&sample_id, "saturation", saturation(&fractures, &gas, dx))?;
    let factor = stage(&sample_id, "vp_factor", vp_factor(&sat, &gas))?;
    let v_final = stage(
        &sample_id,
        "apply_chimney",
        apply_chimney(background, &factor, config.gas.cap),
    )?;

    let clean_gathers = stage(
        &sample_id,
        "simulate_clean",
        simulate_survey(background, &geometry, &wavelet, &solver),
    )?;
    let gas_gathers = stage(
        &sample_id,
        "simulate_gas",
        simulate_survey(&v_final, &geometry, &wavelet, &solver),
    )?;

    // identical migration velocity for both sides: the smoothed clean model
    let migration_velocity = stage(
        &sample_id,
        "smooth_background",
        smooth_velocity(background, config.migration.smoothing_sigma_cells),
    )?;
    let clean = stage(
        &sample_id,
        "migrate_clean",
        migrate(
            &migration_velocity,
            &clean_gathers,
            &geometry,
            &wavelet,
            &solver,
            config.migration.imaging,
            config.migration.postfilter,
        ),
    )?;
    let degraded = stage(
        &sample_id,
        "migrate_gas",
        migrate(
            &migration_velocity,
            &gas_gathers,
            &geometry,
            &wavelet,
            &solver,
            config.migration.imaging,
            config.migration.postfilter,
        ),
    )?;

    let mask = stage(
        &sample_id,
        "mask",
        chimney_mask(&sat, gas.mask_threshold, config.gas.mask_dilation_cells),
    )?;

    let meta = SampleMeta {
        sample_id,
        model_id: model_id.to_string(),
        sample_index,
        rng_seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.config_hash(),
        nz,
        nx,
        dx_m: dx,
        solver,
        geometry,
        wavelet_peak_frequency_hz: wavelet.peak_frequency,
        wavelet_delay_s: wavelet.delay,
        wavelet_amplitude: wavelet.amplitude,
        effective_diffusion_length_m: gas.effective_length(),
        gas,
        fracture: fracture_params,
        mask_dilation_cells: config.gas.mask_dilation_cells,
        perturbation_cap: config.gas.cap,
        migration_smoothing_sigma_cells: config.migration.smoothing_sigma_cells,
        imaging: config.migration.imaging,
        postfilter: config.migration.postfilter,
    };

    Ok(SamplePair {
        degraded,
        clean,
        v_background: background.clone(),
        v_final,
        vp_factor: factor,
        saturation: sat,
        mask,
        fractures,
        meta,
    })
}

fn write_pair(grid: &Grid2D, kind: GridKind, dir: &Path, stem: &str) -> Result<()> {
    write_grid(
        grid,
        kind,
        &dir.join(format!("{stem}.f32")),
        &dir.join(format!("{stem}.json")),
    )
}

/// Persist one sample under `<out>/<model_id>/<sample_id>/`.
pub fn persist_sample(pair: &SamplePair, out_dir: &Path) -> Result<PathBuf> {
    let dir = out_dir
        .join(&pair.meta.model_id)
        .join(&pair.meta.sample_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    write_pair(pair.clean.grid(), GridKind::Image, &dir, "clean")?;
    write_pair(pair.degraded.grid(), GridKind::Image, &dir, "gas")?;
    write_pair(pair.v_background.grid(), GridKind::Velocity, &dir, "v_bg")?;
    write_pair(pair.v_final.grid(), GridKind::Velocity, &dir, "v_final")?;
    write_pair(pair.vp_factor.grid(), GridKind::Factor, &dir, "vp_factor")?;
    write_pair(pair.saturation.grid(), GridKind::Saturation, &dir, "saturation")?;
    write_mask(&pair.mask, &dir.join("mask.u8"), &dir.join("mask.json"))?;

    let fr_path = dir.join("fractures.json");
    let record = pair.fractures.to_record();
    let text = serde_json::to_string_pretty(&record).expect("fracture record serializes");
    fs::write(&fr_path, text).map_err(|e| Error::io(&fr_path, e))?;

    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&pair.meta).expect("meta serializes");
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;

    let preview = dir.join("preview");
    fs::create_dir_all(&preview).map_err(|e| Error::io(&preview, e))?;
    let previews: [(&str, Vec<u8>); 4] = [
        ("clean.pgm", render_grid(pair.clean.grid(), 1.0, 99.0)?),
        ("gas.pgm", render_grid(pair.degraded.grid(), 1.0, 99.0)?),
        ("v_final.pgm", render_grid(pair.v_final.grid(), 0.0, 100.0)?),
        ("mask.pgm", render_mask(&pair.mask)),
    ];
    for (name, bytes) in previews {
        let p = preview.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    Ok(dir)
}

/// Manifest entry for one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEntry {
    pub sample_id: String,
    pub model_id: String,
    pub sample_index: usize,
    pub rng_seed: u64,
    pub split: Split,
    /// Path of the sample directory relative to the manifest.
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedSample {
    pub sample_id: String,
    pub model_id: String,
    pub error: String,
}

/// Dataset-level index written to `<out>/manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub dry_run: bool,
    pub samples: Vec<SampleEntry>,
    pub failed: Vec<FailedSample>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!(
            "{}: invalid manifest: {e}",
            path.display()
        )))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn count_split(&self, split: Split) -> usize {
        self.samples.iter().filter(|s| s.split == split).count()
    }
}

/// Runtime options that do not affect sample content (and therefore never
/// land in metadata): output root, worker count, dry-run switch.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub dry_run: bool,
    pub master_seed_override: Option<u64>,
}

/// Generate the dataset described by the config.
///
/// Per model, `samples_per_model` samples with seeds derived from
/// (master_seed, model_id, sample_index); the split is disjoint by velocity
/// model. With `dry_run` the manifest (ids, seeds, splits) is produced
/// without reading models or simulating. Failed samples are recorded in the
/// manifest without aborting the run.
pub fn generate_dataset(config: &PipelineConfig, options: &RunOptions) -> Result<DatasetManifest> {
    config.validate()?;
    let models = config.model_ids()?;
    let test_ids = config.test_model_ids()?;
    let master_seed = options
        .master_seed_override
        .unwrap_or(config.dataset.master_seed);

    let mut planned: Vec<SampleEntry> = Vec::new();
    for (model_id, _) in &models {
        let split = if test_ids.contains(model_id) {
            Split::Test
        } else {
            Split::Train
        };
        for sample_index in 0..config.dataset.samples_per_model {
            let sample_id = format!("{model_id}_s{sample_index:03}");
            planned.push(SampleEntry {
                sample_id: sample_id.clone(),
                model_id: model_id.clone(),
                sample_index,
                rng_seed: derive_seed(master_seed, model_id, sample_index as u64),
                split,
                path: format!("{model_id}/{sample_id}"),
            });
        }
    }

    let mut manifest = DatasetManifest {
        config_hash: config.config_hash(),
        master_seed,
        dry_run: options.dry_run,
        samples: Vec::new(),
        failed: Vec::new(),
    };

    if options.dry_run {
        manifest.samples = planned;
        return Ok(manifest);
    }

    fs::create_dir_all(&options.out_dir).map_err(|e| Error::io(&options.out_dir, e))?;

    let run = || -> (Vec<(SampleEntry, Option<FailedSample>)>,) {
        let results: Vec<(SampleEntry, Option<FailedSample>)> = planned
            .par_iter()
            .map(|entry| {
                let outcome = (|| -> Result<()> {
                    let (_, model_path) = models
                        .iter()
                        .find(|(id, _)| *id == entry.model_id)
                        .expect("planned entries come from the model list");
                    let meta_path = model_path.with_extension("json");
                    let (grid, _) = read_grid(model_path, &meta_path)?;
                    let background = VelocityModel::new(grid)?;
                    let pair = generate_sample(
                        &background,
                        &entry.model_id,
                        entry.sample_index,
                        config,
                        entry.rng_seed,
                    )?;
                    persist_sample(&pair, &options.out_dir)?;
                    Ok(())
                })();
                let failed = outcome.err().map(|e| FailedSample {
                    sample_id: entry.sample_id.clone(),
                    model_id: entry.model_id.clone(),
                    error: e.to_string(),
                });
                (entry.clone(), failed)
            })
            .collect();
        (results,)
    };

    let (results,) = match options.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(run)
        }
        None => run(),
    };

    for (entry, failed) in results {
        match failed {
            Some(f) => manifest.failed.push(f),
            None => manifest.samples.push(entry),
        }
    }
    manifest.save(&options.out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Evaluation mode for [`eval_run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Predictions are masks scored against the chimney mask.
    Detection,
    /// Predictions are images scored against the clean image.
    Enhancement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionSampleScore {
    pub sample_id: String,
    #[serde(flatten)]
    pub scores: SegScores,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhancementSampleScore {
    pub sample_id: String,
    #[serde(flatten)]
    pub scores: EnhScores,
}

/// Mean and median of a named metric across samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    /// Samples where the metric was undefined (e.g. constant-truth corr).
    pub undefined: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub mask_restricted: bool,
    pub detection: Vec<DetectionSampleScore>,
    pub enhancement: Vec<EnhancementSampleScore>,
    pub aggregates: Vec<Aggregate>,
    /// Sample ids with no matching prediction file.
    pub missing: Vec<String>,
    /// Per-sample errors (shape mismatches, unreadable files).
    pub errors: Vec<FailedSample>,
}

fn aggregate(metric: &str, values: &[Option<f64>]) -> Aggregate {
    let defined: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    let undefined = values.len() - defined.len();
    if defined.is_empty() {
        return Aggregate {
            metric: metric.to_string(),
            mean: f64::NAN,
            median: f64::NAN,
            undefined,
        };
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    let mut sorted = defined.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Aggregate {
        metric: metric.to_string(),
        mean,
        median,
        undefined,
    }
}

/// Score predictions against a generated dataset.
///
/// `manifest_path` locates `manifest.json`; sample artifacts are resolved
/// relative to it. Predictions live flat in `predictions_dir` as
/// `<sample_id>.u8` (+ `.json`) for detection or `<sample_id>.f32`
/// (+ `.json`) for enhancement. Missing predictions are listed, not
/// silently skipped.
pub fn eval_run(
    manifest_path: &Path,
    predictions_dir: &Path,
    mode: EvalMode,
    mask_restricted: bool,
) -> Result<EvalReport> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut report = EvalReport {
        mode,
        mask_restricted,
        detection: Vec::new(),
        enhancement: Vec::new(),
        aggregates: Vec::new(),
        missing: Vec::new(),
        errors: Vec::new(),
    };

    for entry in &manifest.samples {
        let sample_dir = root.join(&entry.path);
        let result = (|| -> Result<bool> {
            match mode {
                EvalMode::Detection => {
                    let pred_data = predictions_dir.join(format!("{}.u8", entry.sample_id));
                    let pred_meta = predictions_dir.join(format!("{}.json", entry.sample_id));
                    if !pred_data.exists() {
                        return Ok(false);
                    }
                    let pred = read_mask(&pred_data, &pred_meta)?;
                    let truth = read_mask(&sample_dir.join("mask.u8"), &sample_dir.join("mask.json"))?;
                    let scores = seg_scores(&pred, &truth)?;
                    report.detection.push(DetectionSampleScore {
                        sample_id: entry.sample_id.clone(),
                        scores,
                    });
                }
                EvalMode::Enhancement => {
                    let pred_data = predictions_dir.join(format!("{}.f32", entry.sample_id));
                    let pred_meta = predictions_dir.join(format!("{}.json", entry.sample_id));
                    if !pred_data.exists() {
                        return Ok(false);
                    }
                    let (pred, _) = read_grid(&pred_data, &pred_meta)?;
                    let (truth, _) =
                        read_grid(&sample_dir.join("clean.f32"), &sample_dir.join("clean.json"))?;
                    let mask = if mask_restricted {
                        Some(read_mask(
                            &sample_dir.join("mask.u8"),
                            &sample_dir.join("mask.json"),
                        )?)
                    } else {
                        None
                    };
                    let scores = enh_scores(&pred, &truth, mask.as_ref())?;
                    report.enhancement.push(EnhancementSampleScore {
                        sample_id: entry.sample_id.clone(),
                        scores,
                    });
                }
            }
            Ok(true)
        })();
        match result {
            Ok(true) => {}
            Ok(false) => report.missing.push(entry.sample_id.clone()),
            Err(e) => report.errors.push(FailedSample {
                sample_id: entry.sample_id.clone(),
                model_id: entry.model_id.clone(),
                error: e.to_string(),
            }),
        }
    }

    match mode {
        EvalMode::Detection => {
            let iou: Vec<Option<f64>> = report.detection.iter().map(|s| Some(s.scores.iou)).collect();
            let dice: Vec<Option<f64>> =
                report.detection.iter().map(|s| Some(s.scores.dice)).collect();
            report.aggregates.push(aggregate("iou", &iou));
            report.aggregates.push(aggregate("dice", &dice));
        }
        EvalMode::Enhancement => {
            let ssim: Vec<Option<f64>> =
                report.enhancement.iter().map(|s| Some(s.scores.ssim)).collect();
            let psnr: Vec<Option<f64>> =
                report.enhancement.iter().map(|s| Some(s.scores.psnr)).collect();
            let corr: Vec<Option<f64>> = report.enhancement.iter().map(|s| s.scores.corr).collect();
            let snr: Vec<Option<f64>> =
                report.enhancement.iter().map(|s| Some(s.scores.snr)).collect();
            report.aggregates.push(aggregate("ssim", &ssim));
            report.aggregates.push(aggregate("psnr", &psnr));
            report.aggregates.push(aggregate("corr", &corr));
            report.aggregates.push(aggregate("snr", &snr));
        }
    }
    Ok(report)
}

/// Mean absolute difference between two images inside and outside a mask.
pub fn masked_mean_abs_diff(a: &Grid2D, b: &Grid2D, mask: &MaskGrid) -> Result<(f64, f64)> {
    if !a.same_shape(b) || !mask.same_shape_as_grid(a) {
        return Err(Error::ShapeMismatch(
            "images and mask must share a shape".into(),
        ));
    }
    let mut inside_sum = 0.0;
    let mut inside_n = 0usize;
    let mut outside_sum = 0.0;
    let mut outside_n = 0usize;
    for i in 0..a.len() {
        let d = (a.values()[i] - b.values()[i]).abs();
        if mask.values()[i] {
            inside_sum += d;
            inside_n += 1;
        } else {
            outside_sum += d;
            outside_n += 1;
        }
    }
    Ok((
        if inside_n > 0 { inside_sum / inside_n as f64 } else { 0.0 },
        if outside_n > 0 { outside_sum / outside_n as f64 } else { 0.0 },
    ))
}
