//! Job configuration: TOML-backed, with defaults carrying the identified
//! reference-rig parameter set so `config --defaults` prints a complete,
//! runnable configuration.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dynamics::{OscillatorParams, SystemModel, TensionLaw, TensionWindows};
use crate::error::{Error, Result};
use crate::identify::{GammaIdentifyOptions, PatternSearchOptions};
use crate::joint_models::{DampingModel, LooseningModel, StiffnessModel};
use crate::synth::{NoiseLevel, NoiseSpec, SynthOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub system: SystemConfig,
    /// Constitutive models; absent sections must be produced by `fit-models`
    /// before commands that need them can run.
    pub stiffness_model: Option<StiffnessModel>,
    pub damping_model: Option<DampingModel>,
    pub loosening_model: Option<LooseningModel>,
    pub filters: FilterConfig,
    pub windows: WindowConfig,
    pub solver: SolverConfig,
    pub optimizer: OptimizerConfig,
    pub modal: ModalConfig,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub mass_lo_kg: f64,
    pub mass_so_kg: f64,
    /// Grounding stiffnesses identified from the uncoupled tests.
    pub stiffness_lo_npm: f64,
    pub stiffness_so_npm: f64,
    pub damping_lo_nspm: f64,
    pub damping_so_nspm: f64,
    /// Flexure-buckling compensation applied to the grounding stiffnesses
    /// for every coupled-system computation.
    pub stiffness_correction_lo: f64,
    pub stiffness_correction_so: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            mass_lo_kg: 8.625,
            mass_so_kg: 0.9888,
            stiffness_lo_npm: 8148.7,
            stiffness_so_npm: 76_500.0,
            damping_lo_nspm: 8.2,
            damping_so_nspm: 2.696,
            stiffness_correction_lo: 1.10,
            stiffness_correction_so: 1.20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// High-pass cutoff for uncoupled-test conditioning (Hz).
    pub uncoupled_cutoff_hz: f64,
    /// High-pass cutoff for coupled-test conditioning (Hz).
    pub coupled_cutoff_hz: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            uncoupled_cutoff_hz: 2.0,
            coupled_cutoff_hz: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub initial_s: (f64, f64),
    pub final_s: (f64, f64),
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            initial_s: (0.0, 0.4),
            final_s: (2.0, 8.0),
        }
    }
}

impl WindowConfig {
    pub fn tension_windows(&self) -> TensionWindows {
        TensionWindows {
            initial: self.initial_s,
            final_: self.final_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub mesh_tolerance: f64,
    pub function_tolerance: f64,
    pub step_tolerance: f64,
    pub gamma_initial: f64,
    pub gamma_lower: f64,
    pub gamma_upper: f64,
    /// Search in a signed-log transform of the rate (recommended for very
    /// wide bounds; off reproduces the raw-space identification setup).
    pub log_transform: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mesh_tolerance: 1e-12,
            function_tolerance: 2.2204e-16,
            step_tolerance: 2.2204e-16,
            gamma_initial: 1e8,
            gamma_lower: -1e10,
            gamma_upper: 1e10,
            log_transform: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModalConfig {
    pub peak_window_s: f64,
    pub reject_above_hz: f64,
    pub min_prominence: f64,
    /// Dead time between the impact and the start of the analysis window;
    /// lets the conditioning filters' impact transient decay before peaks
    /// are collected.
    pub transient_guard_s: f64,
}

impl Default for ModalConfig {
    fn default() -> Self {
        Self {
            peak_window_s: 3.0,
            reject_above_hz: 17.0,
            min_prominence: 0.01,
            transient_guard_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub accel_rate_hz: f64,
    pub tension_rate_hz: f64,
    pub pretrigger_s: f64,
    pub impulse_width_s: f64,
    /// Absolute Gaussian rms on the acceleration channels (m/s^2); ignored
    /// when the relative level is set.
    pub accel_noise_rms: f64,
    pub tension_noise_rms: f64,
    /// Noise as a fraction of each clean channel's own scale; overrides the
    /// absolute levels when positive.
    pub accel_noise_relative: f64,
    pub tension_noise_relative: f64,
    pub coupled: CampaignConfig,
    pub loosening: CampaignConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub preloads_n: Vec<f64>,
    pub amplitude_n: f64,
    pub duration_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            accel_rate_hz: 19_200.0,
            tension_rate_hz: 4_800.0,
            pretrigger_s: 0.5,
            impulse_width_s: 0.002,
            accel_noise_rms: 0.0,
            tension_noise_rms: 0.0,
            accel_noise_relative: 0.0,
            tension_noise_relative: 0.0,
            coupled: CampaignConfig {
                preloads_n: log_spaced(5.8, 3013.0, 58),
                amplitude_n: 30.0,
                duration_s: 30.5,
            },
            loosening: CampaignConfig {
                preloads_n: log_spaced(50.0, 3000.0, 84),
                amplitude_n: 1600.0,
                duration_s: 30.5,
            },
        }
    }
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            preloads_n: Vec::new(),
            amplitude_n: 0.0,
            duration_s: 30.5,
        }
    }
}

/// Logarithmically spaced grid, endpoints included.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            stiffness_model: Some(StiffnessModel {
                k_i: 9.763e5,
                alpha: -0.0608,
                beta: 2.003,
            }),
            damping_model: Some(DampingModel {
                c_d: 1853.0,
                c_i: 1717.4,
                eta: -0.00922,
            }),
            loosening_model: Some(LooseningModel {
                gamma_d: 11.79,
                gamma_i: 7.974,
                rho: -0.00362,
            }),
            filters: FilterConfig::default(),
            windows: WindowConfig::default(),
            solver: SolverConfig::default(),
            optimizer: OptimizerConfig::default(),
            modal: ModalConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Toml(format!("{}: {e}", path.display())))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: JobConfig = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.corrected_lo()?.validate()?;
        self.corrected_so()?.validate()?;
        if let Some(m) = &self.stiffness_model {
            m.validate()?;
        }
        if let Some(m) = &self.damping_model {
            m.validate()?;
        }
        if let Some(m) = &self.loosening_model {
            m.validate()?;
        }
        if !(self.solver.rel_tol > 0.0 && self.solver.abs_tol > 0.0) {
            return Err(Error::Validation("solver tolerances must be positive".into()));
        }
        if !(self.filters.uncoupled_cutoff_hz > 0.0 && self.filters.coupled_cutoff_hz > 0.0) {
            return Err(Error::Validation("filter cutoffs must be positive".into()));
        }
        let w = &self.windows;
        if !(w.initial_s.0 < w.initial_s.1 && w.final_s.0 < w.final_s.1) {
            return Err(Error::Validation(
                "tension windows must have increasing bounds".into(),
            ));
        }
        Ok(())
    }

    /// LO grounding parameters with the stiffness correction applied.
    pub fn corrected_lo(&self) -> Result<OscillatorParams> {
        OscillatorParams::new(
            self.system.mass_lo_kg,
            self.system.stiffness_lo_npm * self.system.stiffness_correction_lo,
            self.system.damping_lo_nspm,
        )
    }

    /// SO grounding parameters with the stiffness correction applied.
    pub fn corrected_so(&self) -> Result<OscillatorParams> {
        OscillatorParams::new(
            self.system.mass_so_kg,
            self.system.stiffness_so_npm * self.system.stiffness_correction_so,
            self.system.damping_so_nspm,
        )
    }

    /// Assemble the full system model. `law` selects what drives the
    /// tension; commands that need the identified loosening model call
    /// [`JobConfig::system_model_with_loosening`].
    pub fn system_model(&self, law: TensionLaw) -> Result<SystemModel> {
        let stiffness_model = self.stiffness_model.ok_or_else(|| {
            Error::Validation("config is missing the [stiffness_model] section".into())
        })?;
        let damping_model = self.damping_model.ok_or_else(|| {
            Error::Validation("config is missing the [damping_model] section".into())
        })?;
        let model = SystemModel {
            lo: self.corrected_lo()?,
            so: self.corrected_so()?,
            stiffness_model,
            damping_model,
            tension_law: law,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn system_model_with_loosening(&self) -> Result<SystemModel> {
        let loosening = self.loosening_model.ok_or_else(|| {
            Error::Validation("config is missing the [loosening_model] section".into())
        })?;
        self.system_model(TensionLaw::TensionDependent(loosening))
    }

    pub fn gamma_identify_options(&self) -> GammaIdentifyOptions {
        GammaIdentifyOptions {
            search: PatternSearchOptions {
                mesh_tolerance: self.optimizer.mesh_tolerance,
                function_tolerance: self.optimizer.function_tolerance,
                step_tolerance: self.optimizer.step_tolerance,
                ..Default::default()
            },
            gamma_initial: self.optimizer.gamma_initial,
            gamma_lower: self.optimizer.gamma_lower,
            gamma_upper: self.optimizer.gamma_upper,
            log_transform: self.optimizer.log_transform,
            windows: self.windows.tension_windows(),
            rel_tol: self.solver.rel_tol,
            abs_tol: self.solver.abs_tol,
        }
    }

    pub fn modal_options(&self) -> crate::modal::ModalOptions {
        crate::modal::ModalOptions {
            window_s: self.modal.peak_window_s,
            reject_above_hz: self.modal.reject_above_hz,
            min_prominence: self.modal.min_prominence,
        }
    }

    pub fn synth_options(&self, duration_s: f64) -> SynthOptions {
        SynthOptions {
            duration_s,
            pretrigger_s: self.synth.pretrigger_s,
            accel_rate_hz: self.synth.accel_rate_hz,
            tension_rate_hz: self.synth.tension_rate_hz,
            rel_tol: self.solver.rel_tol,
            abs_tol: self.solver.abs_tol,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        let accel = if self.synth.accel_noise_relative > 0.0 {
            NoiseLevel::Relative(self.synth.accel_noise_relative)
        } else {
            NoiseLevel::Absolute(self.synth.accel_noise_rms)
        };
        let tension = if self.synth.tension_noise_relative > 0.0 {
            NoiseLevel::Relative(self.synth.tension_noise_relative)
        } else {
            NoiseLevel::Absolute(self.synth.tension_noise_rms)
        };
        NoiseSpec {
            accel,
            tension,
            ambient_tone: None,
            seed: self.synth.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = JobConfig::default();
        let text = config.to_toml().unwrap();
        let parsed: JobConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, parsed);
    }

    #[test]
    fn defaults_validate_and_carry_reference_values() {
        let config = JobConfig::default();
        config.validate().unwrap();
        let lo = config.corrected_lo().unwrap();
        assert!((lo.stiffness - 8963.57).abs() < 0.1);
        let so = config.corrected_so().unwrap();
        assert!((so.stiffness - 91800.0).abs() < 0.1);
        let model = config.system_model_with_loosening().unwrap();
        model.validate().unwrap();
    }

    #[test]
    fn default_campaign_mirrors_measured_counts() {
        let config = JobConfig::default();
        assert_eq!(config.synth.coupled.preloads_n.len(), 58);
        assert_eq!(config.synth.loosening.preloads_n.len(), 84);
        assert!((config.synth.coupled.preloads_n[0] - 5.8).abs() < 1e-12);
        assert!((config.synth.coupled.preloads_n[57] - 3013.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = "[system]\nmass_lo_kg = 1.0\nbogus_field = 2.0\n";
        assert!(toml::from_str::<JobConfig>(text).is_err());
    }

    #[test]
    fn missing_model_sections_surface_as_validation_errors() {
        let mut config = JobConfig::default();
        config.stiffness_model = None;
        assert!(matches!(
            config.system_model(TensionLaw::Frozen),
            Err(Error::Validation(_))
        ));
    }
}
