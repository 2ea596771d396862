//! Pipeline configuration: TOML (primary) or JSON, validated strictly.
//!
//! Unknown keys are rejected everywhere so a typo cannot silently fall back
//! to a default. Every physical constant and switch lands in sample metadata
//! so a sample is reproducible from its meta record alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::chimney::{ErfForm, FractureParams, GasParams, GrowthDirection, SECONDS_PER_YEAR};
use crate::error::Error;
use crate::geometry::AcquisitionGeometry;
use crate::rtm::{ImagingCondition, PostFilter};
use crate::solver::{SolverConfig, SpatialOrder};
use crate::wavelet::SourceWavelet;
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Grid spacing in meters (isotropic).
    pub dx_m: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dx_m: 4.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// 2 or 4.
    pub spatial_order: u8,
    pub boundary_width: usize,
    /// Defaults to `0.005 * boundary_width` when omitted.
    pub boundary_strength: Option<f64>,
    pub cfl_safety: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            spatial_order: 4,
            boundary_width: 50,
            boundary_strength: None,
            cfl_safety: 0.9,
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self) -> Result<SolverConfig> {
        let spatial_order = match self.spatial_order {
            2 => SpatialOrder::Two,
            4 => SpatialOrder::Four,
            other => {
                return Err(Error::Config(format!(
                    "spatial_order must be 2 or 4, got {other}"
                )))
            }
        };
        let config = SolverConfig {
            spatial_order,
            boundary_width: self.boundary_width,
            boundary_strength: self
                .boundary_strength
                .unwrap_or(0.005 * self.boundary_width as f64),
            cfl_safety: self.cfl_safety,
            store_snapshots: false,
            dt_override: None,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub n_sources: usize,
    pub source_spacing_m: f64,
    pub source_depth_m: f64,
    pub n_receivers: usize,
    pub receiver_spacing_m: f64,
    pub receiver_depth_m: f64,
    pub record_dt_s: f64,
    pub n_steps: usize,
}

impl Default for GeometrySection {
    /// Full-scale survey defaults: 25 sources at 80 m, 100 receivers at
    /// 20 m, 511 samples at 4 ms.
    fn default() -> Self {
        Self {
            n_sources: 25,
            source_spacing_m: 80.0,
            source_depth_m: 0.0,
            n_receivers: 100,
            receiver_spacing_m: 20.0,
            receiver_depth_m: 0.0,
            record_dt_s: 0.004,
            n_steps: 511,
        }
    }
}

impl GeometrySection {
    /// Build centered surface lines for a model of the given width.
    pub fn build(&self, width_m: f64) -> Result<AcquisitionGeometry> {
        let mut geom = AcquisitionGeometry::surface_lines(
            width_m,
            self.n_sources,
            self.source_spacing_m,
            self.n_receivers,
            self.receiver_spacing_m,
            self.record_dt_s,
            self.n_steps,
        )?;
        for p in &mut geom.source_positions {
            p.0 = self.source_depth_m;
        }
        for p in &mut geom.receiver_positions {
            p.0 = self.receiver_depth_m;
        }
        Ok(geom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletSection {
    pub peak_frequency_hz: f64,
    /// Defaults to `1.5 / peak_frequency` so the wavelet ramps in from zero.
    pub delay_s: Option<f64>,
    pub amplitude: f64,
}

impl Default for WaveletSection {
    fn default() -> Self {
        Self {
            peak_frequency_hz: 15.0,
            delay_s: None,
            amplitude: 1.0,
        }
    }
}

impl WaveletSection {
    pub fn delay(&self) -> f64 {
        self.delay_s.unwrap_or(1.5 / self.peak_frequency_hz)
    }

    pub fn build(&self, record_dt: f64, n_steps: usize) -> Result<SourceWavelet> {
        SourceWavelet::ricker(
            self.peak_frequency_hz,
            self.delay(),
            self.amplitude,
            record_dt,
            n_steps,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasSection {
    pub k_g_pa: f64,
    pub k_s_pa: f64,
    pub g_pa: f64,
    pub rho_g: f64,
    pub rho_s: f64,
    pub d_m2_s: f64,
    pub t_years: f64,
    /// Defaults to `(8 pi D)^-1 * 1e-3` when omitted.
    pub h0: Option<f64>,
    pub l_eff_m: Option<f64>,
    pub saturation_clamp: bool,
    pub erf_form: ErfForm,
    pub mask_threshold: f64,
    pub mask_dilation_cells: usize,
    /// Relative velocity-perturbation cap applied by the chimney.
    pub cap: f64,
    /// Pore-pressure constants (p = rho_w g z). Documented for forward
    /// compatibility; the fixed-constant gas model above does not use them.
    pub rho_w: f64,
    pub gravity: f64,
}

impl Default for GasSection {
    fn default() -> Self {
        Self {
            k_g_pa: 8.0e8,
            k_s_pa: 0.045e9,
            g_pa: 3211.0,
            rho_g: 1900.0,
            rho_s: 1900.0,
            d_m2_s: 1.0e-12,
            t_years: 750.0,
            h0: None,
            l_eff_m: None,
            saturation_clamp: true,
            erf_form: ErfForm::Sqrt,
            mask_threshold: 0.5,
            mask_dilation_cells: 2,
            cap: 0.3,
            rho_w: 1000.0,
            gravity: 9.81,
        }
    }
}

impl GasSection {
    pub fn to_gas_params(&self) -> Result<GasParams> {
        let params = GasParams {
            k_g: self.k_g_pa,
            k_s: self.k_s_pa,
            g: self.g_pa,
            rho_g: self.rho_g,
            rho_s: self.rho_s,
            d: self.d_m2_s,
            t: self.t_years * SECONDS_PER_YEAR,
            h0: self
                .h0
                .unwrap_or(1.0e-3 / (8.0 * std::f64::consts::PI * self.d_m2_s)),
            l_eff_m: self.l_eff_m,
            saturation_clamp: self.saturation_clamp,
            erf_form: self.erf_form,
            mask_threshold: self.mask_threshold,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FractureSection {
    pub n_seeds: usize,
    pub max_length_cells: usize,
    pub max_angle_deg: f64,
    pub depth_band: (f64, f64),
    pub direction: GrowthDirection,
}

impl Default for FractureSection {
    fn default() -> Self {
        let p = FractureParams::default();
        Self {
            n_seeds: p.n_seeds,
            max_length_cells: p.max_length_cells,
            max_angle_deg: p.max_angle_deg,
            depth_band: p.depth_band,
            direction: p.direction,
        }
    }
}

impl FractureSection {
    pub fn to_params(&self, rng_seed: u64) -> Result<FractureParams> {
        let params = FractureParams {
            n_seeds: self.n_seeds,
            max_length_cells: self.max_length_cells,
            max_angle_deg: self.max_angle_deg,
            rng_seed,
            depth_band: self.depth_band,
            direction: self.direction,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MigrationSection {
    pub smoothing_sigma_cells: f64,
    pub imaging: ImagingCondition,
    pub postfilter: PostFilter,
}

impl Default for MigrationSection {
    fn default() -> Self {
        Self {
            smoothing_sigma_cells: 10.0,
            imaging: ImagingCondition::ZeroLag,
            postfilter: PostFilter::None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Velocity model files (`.f32` with `.json` sidecars). Model ids are
    /// the file stems.
    pub models: Vec<String>,
    pub samples_per_model: usize,
    /// Explicit test model ids; when empty, the last `test_model_count`
    /// models in sorted-id order form the test split.
    pub test_models: Vec<String>,
    pub test_model_count: usize,
    pub master_seed: u64,
    pub out_dir: Option<String>,
    pub workers: Option<usize>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            models: Vec::new(),
            samples_per_model: 20,
            test_models: Vec::new(),
            test_model_count: 5,
            master_seed: 0,
            out_dir: None,
            workers: None,
        }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub grid: GridSection,
    pub solver: SolverSection,
    pub geometry: GeometrySection,
    pub wavelet: WaveletSection,
    pub gas: GasSection,
    pub fracture: FractureSection,
    pub migration: MigrationSection,
    pub dataset: DatasetSection,
}

impl PipelineConfig {
    /// Parse TOML (default) or JSON (by `.json` extension), rejecting
    /// unknown keys.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid.dx_m > 0.0) {
            return Err(Error::Config(format!(
                "grid dx_m must be positive, got {}",
                self.grid.dx_m
            )));
        }
        self.solver.to_solver_config()?;
        self.gas.to_gas_params()?;
        self.fracture.to_params(0)?;
        if self.geometry.record_dt_s <= 0.0 || self.geometry.n_steps == 0 {
            return Err(Error::Config(
                "geometry needs positive record_dt_s and n_steps >= 1".into(),
            ));
        }
        if self.wavelet.peak_frequency_hz <= 0.0 {
            return Err(Error::Config("wavelet frequency must be positive".into()));
        }
        if self.migration.smoothing_sigma_cells < 0.0 {
            return Err(Error::Config(
                "migration smoothing sigma must be non-negative".into(),
            ));
        }
        if self.dataset.samples_per_model == 0 {
            return Err(Error::Config("samples_per_model must be at least 1".into()));
        }
        Ok(())
    }

    /// Model ids (file stems) in config order.
    pub fn model_ids(&self) -> Result<Vec<(String, PathBuf)>> {
        let mut out = Vec::with_capacity(self.dataset.models.len());
        for m in &self.dataset.models {
            let path = PathBuf::from(m);
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Config(format!("model path {m} has no usable file stem")))?
                .to_string();
            if out.iter().any(|(existing, _)| *existing == id) {
                return Err(Error::Config(format!("duplicate model id {id}")));
            }
            out.push((id, path));
        }
        if out.is_empty() {
            return Err(Error::Config("dataset.models must list at least one model".into()));
        }
        Ok(out)
    }

    /// Test-split model ids.
    pub fn test_model_ids(&self) -> Result<Vec<String>> {
        let ids: Vec<String> = self.model_ids()?.into_iter().map(|(id, _)| id).collect();
        if !self.dataset.test_models.is_empty() {
            for t in &self.dataset.test_models {
                if !ids.contains(t) {
                    return Err(Error::Config(format!(
                        "test model {t} is not in dataset.models"
                    )));
                }
            }
            return Ok(self.dataset.test_models.clone());
        }
        if self.dataset.test_model_count >= ids.len() {
            return Err(Error::Config(format!(
                "test_model_count {} must be below the model count {}",
                self.dataset.test_model_count,
                ids.len()
            )));
        }
        let mut sorted = ids;
        sorted.sort();
        Ok(sorted[sorted.len() - self.dataset.test_model_count..].to_vec())
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = sha2::Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_survey_parameters() {
        let c = PipelineConfig::default();
        assert_eq!(c.grid.dx_m, 4.0);
        assert_eq!(c.wavelet.peak_frequency_hz, 15.0);
        assert_eq!(c.geometry.n_sources, 25);
        assert_eq!(c.geometry.source_spacing_m, 80.0);
        assert_eq!(c.geometry.n_receivers, 100);
        assert_eq!(c.geometry.receiver_spacing_m, 20.0);
        assert_eq!(c.geometry.record_dt_s, 0.004);
        assert_eq!(c.geometry.n_steps, 511);
        assert_eq!(c.dataset.samples_per_model, 20);
        assert_eq!(c.dataset.test_model_count, 5);
        let gas = c.gas.to_gas_params().unwrap();
        assert_eq!(gas.k_g, 8.0e8);
        assert_eq!(gas.k_s, 4.5e7);
        assert_eq!(gas.g, 3211.0);
        assert_eq!(gas.rho_g, 1900.0);
        assert_eq!(gas.rho_s, 1900.0);
        assert_eq!(gas.d, 1.0e-12);
        assert_eq!(gas.t, 750.0 * SECONDS_PER_YEAR);
        let expected_h0 = 1.0e-3 / (8.0 * std::f64::consts::PI * 1.0e-12);
        assert!((gas.h0 - expected_h0).abs() < 1e-6 * expected_h0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let toml_text = "[solver]\nboundry_width = 10\n";
        let err = toml::from_str::<PipelineConfig>(toml_text).unwrap_err();
        assert!(err.to_string().contains("boundry_width"), "{err}");
    }

    #[test]
    fn json_and_toml_parse_equivalently() {
        let toml_text = "[wavelet]\npeak_frequency_hz = 25.0\n";
        let from_toml: PipelineConfig = toml::from_str(toml_text).unwrap();
        let json_text = r#"{"wavelet": {"peak_frequency_hz": 25.0}}"#;
        let from_json: PipelineConfig = serde_json::from_str(json_text).unwrap();
        assert_eq!(
            from_toml.wavelet.peak_frequency_hz,
            from_json.wavelet.peak_frequency_hz
        );
    }

    #[test]
    fn split_uses_sorted_tail_when_not_explicit() {
        let mut c = PipelineConfig::default();
        c.dataset.models = (1..=20).map(|i| format!("models/m{i:02}.f32")).collect();
        c.dataset.test_model_count = 5;
        let test = c.test_model_ids().unwrap();
        assert_eq!(test, vec!["m16", "m17", "m18", "m19", "m20"]);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = PipelineConfig::default();
        let b = PipelineConfig::default();
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = PipelineConfig::default();
        c.wavelet.peak_frequency_hz = 16.0;
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
