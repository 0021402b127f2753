//! Strict TOML scenario configurations. Every physical key carries its unit
//! as a suffix; unknown keys are rejected.

use std::path::Path;

use atomsense::analysis::{SystematicsScene, WavefrontSpec};
use atomsense::interferometer::DetectionModel;
use atomsense::noise::{ClassicalSensorModel, GaussMarkovModel, PsdPoint, VibrationModel};
use atomsense::physics::Species;
use atomsense::sequencer::{CycleConfig, DynamicDrive, DynamicScene, StaticScene};
use atomsense::velocimetry::VelocityDriftModel;
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// A loaded config file: parsed value plus the SHA-256 of the raw bytes.
pub struct Loaded<T> {
    pub value: T,
    pub sha256: String,
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Loaded<T>, String> {
    let raw = std::fs::read(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let text = std::str::from_utf8(&raw)
        .map_err(|e| format!("config {} is not UTF-8: {e}", path.display()))?;
    let value: T = toml::from_str(text)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&raw);
    Ok(Loaded {
        value,
        sha256: format!("{:x}", hasher.finalize()),
    })
}

/// Hex-encoded SHA-256, used to stamp arbitrary input files into CSV metadata.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn species_by_name(name: &str) -> Result<Species, String> {
    match name {
        "rb87" => Ok(Species::rb87()),
        other => Err(format!("unknown species '{other}' (supported: rb87)")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdNode {
    pub freq_hz: f64,
    pub level: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticConfig {
    pub run: StaticRun,
    pub timing: Timing,
    pub launch: Launch,
    pub truth: Truth,
    pub atoms: Atoms,
    pub vibration: Vibration,
    pub accelerometer: Accelerometer,
    pub drift: Option<Drift>,
    pub hybrid: Option<Hybrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticRun {
    pub species: String,
    pub duration_s: f64,
    pub seed: u64,
    pub lock_gain: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub t_sep_ms: f64,
    pub cycle_period_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Launch {
    pub v_l_mps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub accel_mps2: f64,
    pub omega_rads: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atoms {
    pub n_atoms: u64,
    pub contrast: f64,
    pub detection_mean: f64,
    pub detection_noise_rms: f64,
    pub phase_noise_rms_rad: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vibration {
    pub rms_mps2: f64,
    pub residual_fraction: f64,
    pub rate_hz: f64,
    pub correct: bool,
    pub psd_shape: Vec<PsdNode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Accelerometer {
    pub white_psd_mps2_rthz: f64,
    /// Bias random-walk crossover time, s; 0 disables the random walk.
    pub bias_rw_crossover_s: f64,
    pub initial_bias_mps2: f64,
    pub scale_error: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drift {
    pub accel_sigma_mps2: f64,
    pub accel_tau_s: f64,
    pub omega_sigma_rads: f64,
    pub omega_tau_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hybrid {
    pub update_period_s: f64,
    pub fallback_gain: f64,
}

impl StaticConfig {
    pub fn scene(&self) -> Result<(StaticScene, CycleConfig), String> {
        let species = species_by_name(&self.run.species)?;
        let rw_coeff = if self.accelerometer.bias_rw_crossover_s > 0.0 {
            ClassicalSensorModel::rw_coeff_for_crossover(
                self.accelerometer.white_psd_mps2_rthz,
                self.accelerometer.bias_rw_crossover_s,
            )
        } else {
            0.0
        };
        let scene = StaticScene {
            species,
            a_true: self.truth.accel_mps2,
            omega_true: self.truth.omega_rads,
            n_atoms: self.atoms.n_atoms,
            detection: DetectionModel {
                contrast: self.atoms.contrast,
                mean: self.atoms.detection_mean,
                noise_rms: self.atoms.detection_noise_rms,
            },
            phase_noise_rms: self.atoms.phase_noise_rms_rad,
            vibration: VibrationModel {
                psd_shape: self
                    .vibration
                    .psd_shape
                    .iter()
                    .map(|n| PsdPoint {
                        freq_hz: n.freq_hz,
                        level: n.level,
                    })
                    .collect(),
                rms: self.vibration.rms_mps2,
                residual_fraction: self.vibration.residual_fraction,
            },
            vib_rate: self.vibration.rate_hz,
            accel_sensor: ClassicalSensorModel {
                white_psd: self.accelerometer.white_psd_mps2_rthz,
                bias_rw_coeff: rw_coeff,
                initial_bias: self.accelerometer.initial_bias_mps2,
                scale_error: self.accelerometer.scale_error,
            },
            correct_vibration: self.vibration.correct,
            accel_drift: self.drift.as_ref().map(|d| GaussMarkovModel {
                sigma: d.accel_sigma_mps2,
                tau: d.accel_tau_s,
            }),
            omega_drift: self.drift.as_ref().map(|d| GaussMarkovModel {
                sigma: d.omega_sigma_rads,
                tau: d.omega_tau_s,
            }),
            gain: self.run.lock_gain,
        };
        let cfg = CycleConfig::standard(
            self.timing.cycle_period_s,
            self.timing.t_sep_ms * 1e-3,
            self.launch.v_l_mps,
        );
        Ok((scene, cfg))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicConfig {
    pub run: DynamicRun,
    pub timing: Timing,
    pub launch: Launch,
    pub cloud: Cloud,
    pub scan: Scan,
    pub detection: Detection,
    pub drive: Drive,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicRun {
    pub species: String,
    pub seed: u64,
    pub accel_mps2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cloud {
    pub temperature_uk: f64,
    pub sigma_r_mm: f64,
    pub offset_mm: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub n_shots: usize,
    pub span_fringes: f64,
    pub n_atoms_mc: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub contrast: f64,
    pub mean: f64,
    pub noise_rms: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    pub omega_d_mrads: Vec<f64>,
    pub phi0_rad: f64,
    pub axis: [f64; 3],
    pub beta_plus_deg: f64,
    pub beta_minus_deg: f64,
}

impl DynamicConfig {
    pub fn scene(&self) -> Result<DynamicScene, String> {
        Ok(DynamicScene {
            species: species_by_name(&self.run.species)?,
            v_l: self.launch.v_l_mps,
            a_true: self.run.accel_mps2,
            temperature: self.cloud.temperature_uk * 1e-6,
            sigma_r: self.cloud.sigma_r_mm * 1e-3,
            atom_offset: [
                self.cloud.offset_mm[0] * 1e-3,
                self.cloud.offset_mm[1] * 1e-3,
                self.cloud.offset_mm[2] * 1e-3,
            ],
            n_atoms_mc: self.scan.n_atoms_mc,
            detection: DetectionModel {
                contrast: self.detection.contrast,
                mean: self.detection.mean,
                noise_rms: self.detection.noise_rms,
            },
            t_sep: self.timing.t_sep_ms * 1e-3,
            cycle_period: self.timing.cycle_period_s,
            n_shots: self.scan.n_shots,
            scan_span_fringes: self.scan.span_fringes,
        })
    }

    pub fn drive_for(&self, omega_d_mrads: f64) -> DynamicDrive {
        DynamicDrive {
            omega_d: omega_d_mrads * 1e-3,
            phi0: self.drive.phi0_rad,
            axis: self.drive.axis,
            beta_plus: self.drive.beta_plus_deg.to_radians(),
            beta_minus: self.drive.beta_minus_deg.to_radians(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocimetryConfig {
    pub run: VelocimetryRun,
    pub launch: Launch,
    pub spectroscopy: Spectroscopy,
    pub drift: Option<VelocityDrift>,
    pub tpls_sweep: TplsSweep,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocimetryRun {
    pub species: String,
    pub seed: u64,
    pub duration_s: f64,
    pub n_spectra: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spectroscopy {
    pub pulse_us: f64,
    pub grid_span_khz: f64,
    pub grid_step_hz: f64,
    pub noise_rms: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityDrift {
    pub white_sigma_mps: f64,
    pub gm_sigma_mps: f64,
    pub gm_tau_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TplsSweep {
    pub pulse_durations_us: Vec<f64>,
}

impl VelocimetryConfig {
    pub fn species(&self) -> Result<Species, String> {
        species_by_name(&self.run.species)
    }

    pub fn drift_model(&self) -> Option<VelocityDriftModel> {
        self.drift.as_ref().map(|d| VelocityDriftModel {
            white_sigma: d.white_sigma_mps,
            gm_sigma: d.gm_sigma_mps,
            gm_tau: d.gm_tau_s,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridizeConfig {
    pub run: HybridizeRun,
    pub classical: ClassicalSection,
    pub atomic: AtomicSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridizeRun {
    pub seed: u64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub update_period_s: f64,
    pub fallback_gain: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub white_psd: f64,
    pub bias_rw_crossover_s: f64,
    pub initial_bias: f64,
    pub scale_error: f64,
    pub units: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicSection {
    /// 1-sigma of each atomic update (already averaged over the update
    /// interval), in the same unit as the classical sensor.
    pub sigma_per_update: f64,
}

impl HybridizeConfig {
    pub fn classical_model(&self) -> ClassicalSensorModel {
        let rw = if self.classical.bias_rw_crossover_s > 0.0 {
            ClassicalSensorModel::rw_coeff_for_crossover(
                self.classical.white_psd,
                self.classical.bias_rw_crossover_s,
            )
        } else {
            0.0
        };
        ClassicalSensorModel {
            white_psd: self.classical.white_psd,
            bias_rw_coeff: rw,
            initial_bias: self.classical.initial_bias,
            scale_error: self.classical.scale_error,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub wavefront: WavefrontSection,
    pub geometry: GeometrySection,
    pub drive: BudgetDrive,
    pub environment: EnvironmentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavefrontSection {
    pub order: u32,
    pub optical_quality_waves: f64,
    pub waist_mm: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub dissymmetry_mm: f64,
    pub v_l_mps: f64,
    pub t_sep_ms: f64,
    pub d0_cm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetDrive {
    pub omega_d_mrads: f64,
    pub phi0_rad: f64,
    pub angular_freq_rads: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub omega_static_rads: f64,
    pub tilt_mrad: f64,
    pub gravity_mps2: f64,
}

impl BudgetConfig {
    pub fn scene(&self) -> SystematicsScene {
        let wavelength = self.wavefront.wavelength_nm * 1e-9;
        SystematicsScene {
            wavefront: WavefrontSpec::from_optical_quality(
                self.wavefront.order,
                self.wavefront.optical_quality_waves * wavelength,
                self.wavefront.waist_mm * 1e-3,
                wavelength,
            ),
            dissymmetry: self.geometry.dissymmetry_mm * 1e-3,
            v_l: self.geometry.v_l_mps,
            k_eff: std::f64::consts::TAU * 2.0 / wavelength,
            t_sep: self.geometry.t_sep_ms * 1e-3,
            d0: self.geometry.d0_cm * 1e-2,
            phi0: self.drive.phi0_rad,
            omega_d: self.drive.omega_d_mrads * 1e-3,
            drive_angular_freq: self.drive.angular_freq_rads,
            omega_static: self.environment.omega_static_rads,
            tilt: self.environment.tilt_mrad * 1e-3,
            gravity: self.environment.gravity_mps2,
        }
    }
}
