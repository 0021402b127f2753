//! Measurement protocol: mid-fringe lock, the 8-shot +/-k +/-v alternation,
//! static demodulation into (a, Omega), and fringe-scan extraction of dynamic
//! rotations.
//!
//! Sign conventions (fixed so the noiseless round trip returns the positive
//! configured inputs): the launch axis is x, the Raman axis is z, positive
//! rotation is about x cross z. A shot with signs (s_k, s_v) locks its chirp
//! rate to
//!
//!   alpha_{s_k, s_v} = s_k k (a - 2 s_v v_l Omega).

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::interferometer::{
    detect, detect_uniform, AtomEnsemble, DetectionModel, FringeOutput, InterferometerConfig,
};
use crate::noise::{
    convolve_sensitivity, gen_vibration, ClassicalSensorModel, GaussMarkovModel, SensorTrace,
    VibrationModel,
};
use crate::physics::{Species, Vec3};
use crate::rng::stream_rng;
use crate::analysis::fit_fringe;

/// Consecutive out-of-range error signals before the lock is declared lost.
pub const LOCK_LOSS_STREAK: u32 = 3;
/// Error-signal magnitude (as a fraction of the contrast) treated as out of
/// the linear range.
pub const LOCK_RANGE_FRACTION: f64 = 0.95;

/// Static-mode timing and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    /// Cycle period T_c per shot, s.
    pub cycle_period: f64,
    /// Shots per lock point (two: one on each fringe side).
    pub shots_per_point: usize,
    /// Wave-vector sign per shot of one 8-shot block.
    pub k_pattern: [i8; 8],
    /// Launch sign per shot of one 8-shot block.
    pub v_pattern: [i8; 8],
    /// Pulse separation T, s.
    pub t_sep: f64,
    /// Launch speed magnitude, m/s.
    pub v_l: f64,
}

impl CycleConfig {
    /// Standard four-configuration schedule: pairs (+k,+v), (-k,+v),
    /// (+k,-v), (-k,-v).
    pub fn standard(cycle_period: f64, t_sep: f64, v_l: f64) -> Self {
        CycleConfig {
            cycle_period,
            shots_per_point: 2,
            k_pattern: [1, 1, -1, -1, 1, 1, -1, -1],
            v_pattern: [1, 1, 1, 1, -1, -1, -1, -1],
            t_sep,
            v_l,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.cycle_period <= 2.0 * self.t_sep {
            return Err(CoreError::InvalidParameter(
                "cycle_period must exceed the interferometer duration".into(),
            ));
        }
        if self.shots_per_point != 2 {
            return Err(CoreError::InvalidParameter(
                "mid-fringe operation needs exactly 2 shots per point".into(),
            ));
        }
        for s in self.k_pattern.iter().chain(&self.v_pattern) {
            if *s != 1 && *s != -1 {
                return Err(CoreError::InvalidParameter(
                    "pattern entries must be +/-1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Mid-fringe lock state for one (k, v) configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockState {
    /// Current chirp rate, rad/s^2.
    pub alpha: f64,
    /// Consecutive out-of-range error signals.
    pub bad_streak: u32,
}

impl LockState {
    pub fn new(alpha: f64) -> Self {
        LockState {
            alpha,
            bad_streak: 0,
        }
    }
}

/// One mid-fringe update from a pair of shots taken at alpha +/- delta with
/// delta T^2 = pi/2.
///
/// Returns the updated state and the instantaneous chirp-rate estimate (the
/// lock value corrected by the full measured error), which is what the
/// demodulation consumes.
pub fn mid_fringe_step(
    state: &LockState,
    p2_plus: &FringeOutput,
    p2_minus: &FringeOutput,
    gain: f64,
    t_sep: f64,
) -> Result<(LockState, f64), CoreError> {
    let contrast = 0.5 * (p2_plus.contrast + p2_minus.contrast);
    if contrast <= 0.0 {
        return Err(CoreError::FitFailed("zero contrast in lock".into()));
    }
    let t2 = t_sep * t_sep;
    let raw = p2_minus.p2 - p2_plus.p2; // = C sin(e) in the ideal model
    let bad = raw.abs() > LOCK_RANGE_FRACTION * contrast;
    let bad_streak = if bad { state.bad_streak + 1 } else { 0 };
    if bad_streak >= LOCK_LOSS_STREAK {
        return Err(CoreError::FringeLost(bad_streak as usize));
    }
    let normalized = (raw / contrast).clamp(-1.0, 1.0);
    let alpha_inst = state.alpha + normalized.asin() / t2;
    let next = LockState {
        alpha: state.alpha + gain * normalized / t2,
        bad_streak,
    };
    Ok((next, alpha_inst))
}

/// The four locked chirp rates of one 8-shot block, rad/s^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticAlphas {
    pub pk_pv: f64,
    pub mk_pv: f64,
    pub pk_mv: f64,
    pub mk_mv: f64,
}

/// k-reversal / v-reversal demodulation of one block, with the classical
/// vibration correction:
///
///   a     = [(a_+k,-v - a_-k,-v) + (a_+k,+v - a_-k,+v)] / 4k  - mean(a_conv)
///   Omega = [(a_+k,-v - a_-k,-v) - (a_+k,+v - a_-k,+v)] / 8 v k
///           + delta_a_corr / 8v
///
/// where delta_a_corr is the (+v minus -v) difference of the classical
/// sensitivity-weighted accelerations. `a_conv` holds one value per shot in
/// schedule order; with `correct` false both correction terms are dropped.
pub fn demodulate_static(
    alphas: &StaticAlphas,
    a_conv: &[f64; 8],
    correct: bool,
    v_l: f64,
    k_eff: f64,
) -> (f64, f64) {
    let d_mv = alphas.pk_mv - alphas.mk_mv;
    let d_pv = alphas.pk_pv - alphas.mk_pv;
    let mut a = (d_mv + d_pv) / (4.0 * k_eff);
    let mut omega = (d_mv - d_pv) / (8.0 * v_l * k_eff);
    if correct {
        let pair = |i: usize| 0.5 * (a_conv[2 * i] + a_conv[2 * i + 1]);
        let (pk_pv, mk_pv, pk_mv, mk_mv) = (pair(0), pair(1), pair(2), pair(3));
        let delta_a_corr = (pk_pv + mk_pv) - (pk_mv + mk_mv);
        omega += delta_a_corr / (8.0 * v_l);
        a -= 0.25 * (pk_pv + mk_pv + pk_mv + mk_mv);
    }
    (a, omega)
}

/// Classical correction term of one block, in the same orientation as
/// [`demodulate_static`].
pub fn delta_a_corr(a_conv: &[f64; 8]) -> f64 {
    let pair = |i: usize| 0.5 * (a_conv[2 * i] + a_conv[2 * i + 1]);
    (pair(0) + pair(1)) - (pair(2) + pair(3))
}

/// One demodulated 4-s block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Block end time, s.
    pub t: f64,
    pub alphas: StaticAlphas,
    /// Demodulated acceleration, m/s^2.
    pub a: f64,
    /// Demodulated rotation rate, rad/s.
    pub omega: f64,
    /// Classical sensitivity-weighted acceleration per shot, m/s^2.
    pub a_conv: [f64; 8],
    /// Correction applied to omega times 8 v_l, m/s^2.
    pub delta_a_corr: f64,
}

/// Campaign output CSV:
/// (t_s, a_mps2, omega_rads, alpha_pk_pv, alpha_pk_mv, alpha_mk_pv,
/// alpha_mk_mv, a_conv_correction).
pub fn write_campaign_csv(
    w: &mut impl Write,
    records: &[MeasurementRecord],
) -> std::io::Result<()> {
    writeln!(
        w,
        "t_s,a_mps2,omega_rads,alpha_pk_pv,alpha_pk_mv,alpha_mk_pv,alpha_mk_mv,a_conv_correction"
    )?;
    for r in records {
        writeln!(
            w,
            "{:.3},{:.12e},{:.12e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.t,
            r.a,
            r.omega,
            r.alphas.pk_pv,
            r.alphas.pk_mv,
            r.alphas.mk_pv,
            r.alphas.mk_mv,
            r.delta_a_corr
        )?;
    }
    Ok(())
}

/// Everything a static campaign needs: truth, environment and instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticScene {
    pub species: Species,
    /// True mean acceleration along the Raman axis, m/s^2.
    pub a_true: f64,
    /// True rotation rate about the sensitive axis, rad/s.
    pub omega_true: f64,
    /// Atoms detected per shot.
    pub n_atoms: u64,
    pub detection: DetectionModel,
    /// Extra per-shot interferometer phase noise, rad rms.
    pub phase_noise_rms: f64,
    pub vibration: VibrationModel,
    /// Vibration synthesis rate, Hz (>= 250 for a resolved kernel).
    pub vib_rate: f64,
    pub accel_sensor: ClassicalSensorModel,
    /// Apply the classical vibration correction in the demodulation.
    pub correct_vibration: bool,
    /// Slow physical acceleration drift.
    pub accel_drift: Option<GaussMarkovModel>,
    /// Slow physical rotation drift.
    pub omega_drift: Option<GaussMarkovModel>,
    /// Mid-fringe loop gain.
    pub gain: f64,
}

// Seed-stream channels; the index part is a chunk or shot counter.
const CH_VIB_COMMON: u64 = 0;
const CH_VIB_INDEP: u64 = 1;
const CH_SENSOR: u64 = 2;
const CH_DETECT: u64 = 3;
const CH_DRIFT: u64 = 4;

fn channel_stream(index: u64, channel: u64) -> u64 {
    index * 8 + channel
}

/// Cycles per vibration chunk; chunks align with whole 8-shot blocks.
const SHOTS_PER_CHUNK: usize = 128;

/// Run the static protocol for `duration` seconds and emit one record per
/// 8-shot block. Deterministic in (scene, cfg, seed).
pub fn run_static_campaign(
    duration: f64,
    scene: &StaticScene,
    cfg: &CycleConfig,
    seed: u64,
) -> Result<Vec<MeasurementRecord>, CoreError> {
    cfg.validate()?;
    if scene.vib_rate * cfg.cycle_period < 125.0 {
        return Err(CoreError::RateTooLow(
            scene.vib_rate,
            125.0 / cfg.cycle_period,
        ));
    }
    let k_eff = scene.species.k_eff();
    let t2 = cfg.t_sep * cfg.t_sep;
    let delta = std::f64::consts::FRAC_PI_2 / t2;
    let block_period = 8.0 * cfg.cycle_period;
    let n_blocks = (duration / block_period).floor() as usize;
    let blocks_per_chunk = SHOTS_PER_CHUNK / 8;
    let chunk_duration = SHOTS_PER_CHUNK as f64 * cfg.cycle_period;

    // Locks start on the noiseless solution; the first blocks are therefore
    // already near mid-fringe, as after a real acquisition warm-up.
    let alpha0 = |s_k: f64, s_v: f64| {
        s_k * k_eff * (scene.a_true - 2.0 * s_v * cfg.v_l * scene.omega_true)
    };
    let mut locks = [
        LockState::new(alpha0(1.0, 1.0)),
        LockState::new(alpha0(-1.0, 1.0)),
        LockState::new(alpha0(1.0, -1.0)),
        LockState::new(alpha0(-1.0, -1.0)),
    ];

    let mut drift_rng = stream_rng(seed, channel_stream(0, CH_DRIFT));
    let mut accel_drift = scene.accel_drift.map(|m| m.init(&mut drift_rng));
    let mut omega_drift = scene.omega_drift.map(|m| m.init(&mut drift_rng));

    let mut sensor_bias = scene.accel_sensor.initial_bias;
    let mut atom_vib = SensorTrace::zeros(scene.vib_rate, 0.0, 0);
    let mut class_vib = atom_vib.clone();

    let mut records = Vec::with_capacity(n_blocks);
    for block in 0..n_blocks {
        if block % blocks_per_chunk == 0 {
            let chunk = (block / blocks_per_chunk) as u64;
            let t0 = chunk as f64 * chunk_duration;
            let common = gen_vibration(
                &scene.vibration,
                chunk_duration,
                scene.vib_rate,
                t0,
                &mut stream_rng(seed, channel_stream(chunk, CH_VIB_COMMON)),
            )?;
            let indep = gen_vibration(
                &scene.vibration,
                chunk_duration,
                scene.vib_rate,
                t0,
                &mut stream_rng(seed, channel_stream(chunk, CH_VIB_INDEP)),
            )?;
            let r = scene.vibration.residual_fraction;
            atom_vib = SensorTrace {
                sample_rate: scene.vib_rate,
                start_time: t0,
                samples: common
                    .samples
                    .iter()
                    .zip(&indep.samples)
                    .map(|(c, i)| c + r * i)
                    .collect(),
            };
            let mut sensor_rng = stream_rng(seed, channel_stream(chunk, CH_SENSOR));
            let (sampled, bias_out) = crate::noise::sample_classical_from(
                &scene.accel_sensor,
                &common,
                sensor_bias,
                &mut sensor_rng,
            );
            class_vib = sampled;
            sensor_bias = bias_out;
        }

        // Drift states step once per block.
        if let (Some(m), Some(s)) = (scene.accel_drift.as_ref(), accel_drift.as_mut()) {
            m.step(s, block_period, &mut drift_rng);
        }
        if let (Some(m), Some(s)) = (scene.omega_drift.as_ref(), omega_drift.as_mut()) {
            m.step(s, block_period, &mut drift_rng);
        }
        let a_block = scene.a_true + accel_drift.map_or(0.0, |s| s.value);
        let omega_block = scene.omega_true + omega_drift.map_or(0.0, |s| s.value);

        let block_start = block as f64 * block_period;
        let mut a_conv = [0.0; 8];
        let mut alpha_inst = [0.0; 4];
        let mut pair_outputs: [Option<FringeOutput>; 2] = [None, None];
        for shot in 0..8 {
            let g = (block * 8 + shot) as u64;
            let s_k = f64::from(cfg.k_pattern[shot]);
            let s_v = f64::from(cfg.v_pattern[shot]);
            let pair = shot / 2;
            let side = shot % 2; // 0: +delta, 1: -delta
            let t_shot = block_start + shot as f64 * cfg.cycle_period;
            let t_pi = t_shot + 2.5 * cfg.t_sep;

            let a_vib = convolve_sensitivity(&atom_vib, t_pi, cfg.t_sep)?;
            a_conv[shot] = convolve_sensitivity(&class_vib, t_pi, cfg.t_sep)?;

            let phase_rate =
                s_k * k_eff * (a_block + a_vib - 2.0 * s_v * cfg.v_l * omega_block);
            let alpha_mod = locks[pair].alpha + if side == 0 { delta } else { -delta };
            let mut shot_rng = stream_rng(seed, channel_stream(g, CH_DETECT));
            let phase = (phase_rate - alpha_mod) * t2
                + scene.phase_noise_rms * shot_rng.sample::<f64, _>(StandardNormal);
            let out = detect_uniform(phase, scene.n_atoms, &scene.detection, &mut shot_rng);
            pair_outputs[side] = Some(out);
            if side == 1 {
                let (next, inst) = mid_fringe_step(
                    &locks[pair],
                    pair_outputs[0].as_ref().unwrap(),
                    pair_outputs[1].as_ref().unwrap(),
                    scene.gain,
                    cfg.t_sep,
                )?;
                locks[pair] = next;
                alpha_inst[pair] = inst;
            }
        }
        let alphas = StaticAlphas {
            pk_pv: alpha_inst[0],
            mk_pv: alpha_inst[1],
            pk_mv: alpha_inst[2],
            mk_mv: alpha_inst[3],
        };
        let (a, omega) =
            demodulate_static(&alphas, &a_conv, scene.correct_vibration, cfg.v_l, k_eff);
        records.push(MeasurementRecord {
            t: block_start + block_period,
            alphas,
            a,
            omega,
            a_conv,
            delta_a_corr: delta_a_corr(&a_conv),
        });
    }
    Ok(records)
}

/// Platform rotation drive of the dynamic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicDrive {
    /// Drive amplitude, rad/s.
    pub omega_d: f64,
    /// Drive phase at the pi pulse, rad.
    pub phi0: f64,
    /// Drive axis in the platform (X, Y) plane; the atoms sense the X
    /// component.
    pub axis: Vec3,
    /// Gyroscope X-axis misalignments, rad.
    pub beta_plus: f64,
    pub beta_minus: f64,
}

impl DynamicDrive {
    /// Rotation rate about the sensitive axis at time `t` relative to the pi
    /// pulse: Omega_d cos(2 pi t / T_c + phi0).
    pub fn omega_at(&self, t: f64, cycle_period: f64) -> f64 {
        self.omega_d * self.axis[0]
            * (std::f64::consts::TAU * t / cycle_period + self.phi0).cos()
    }

    /// Mirror tilt (integral of the rate) at time `t` relative to the pi
    /// pulse. The constant of integration is irrelevant: a static tilt is
    /// annihilated by the pulse sequence.
    pub fn tilt_at(&self, t: f64, cycle_period: f64) -> f64 {
        let w = std::f64::consts::TAU / cycle_period;
        self.omega_d * self.axis[0] / w * (w * t + self.phi0).sin()
    }
}

/// Dynamic-mode scene: cloud, geometry and scan settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicScene {
    pub species: Species,
    /// Launch speed magnitude, m/s.
    pub v_l: f64,
    /// True mean acceleration along the Raman axis, m/s^2.
    pub a_true: f64,
    /// Cloud temperature, K.
    pub temperature: f64,
    /// Cloud rms radius, m.
    pub sigma_r: f64,
    /// Mean cloud position at the pi pulse (distance from the rotation
    /// center), m.
    pub atom_offset: Vec3,
    /// Monte Carlo atoms per shot.
    pub n_atoms_mc: usize,
    pub detection: DetectionModel,
    pub t_sep: f64,
    pub cycle_period: f64,
    /// Shots per fringe scan.
    pub n_shots: usize,
    /// Scan width in fringes (>= 1.5).
    pub scan_span_fringes: f64,
}

/// Fitted result of one fringe scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Fringe-centering chirp rate, rad/s^2.
    pub alpha_star: f64,
    /// Fitted contrast.
    pub contrast: f64,
    /// Statistical error of alpha_star, rad/s^2.
    pub alpha_err: f64,
    /// Scanned chirp rates, rad/s^2.
    pub scan_alphas: Vec<f64>,
    /// Measured transition probability per scanned point.
    pub scan_p2s: Vec<f64>,
}

/// Scan the chirp rate over `n_shots` shots, correct each shot by its
/// convolved mirror vibration (none is simulated here beyond the drive), fit
/// the fringe and return the centering chirp rate and contrast.
///
/// Dynamic scans launch against the x axis (v_sign = -1), which makes the
/// plain second-difference combination in [`demodulate_dynamic`] return the
/// drive with a positive sign under this crate's axis conventions.
///
/// `omega_ref` is a coarse reference rotation rate (typically the classical
/// gyroscope reading) used to center the scan on the expected fringe. Large
/// rotations shift the pattern by more than one fringe period, so the plain
/// scan center would resolve the 2 pi phase ambiguity onto the wrong fringe;
/// the reference only needs to be within a half fringe,
/// |Omega - omega_ref| < pi / (4 k v_l T^2), of the true effective rate.
pub fn run_fringe_scan(
    scene: &DynamicScene,
    drive: &DynamicDrive,
    k_sign: i8,
    omega_ref: f64,
    seed: u64,
    scan_id: u64,
) -> Result<ScanResult, CoreError> {
    if scene.scan_span_fringes < 1.5 {
        return Err(CoreError::InvalidParameter(
            "scan must span at least 1.5 fringes".into(),
        ));
    }
    let k_eff = scene.species.k_eff();
    let t2 = scene.t_sep * scene.t_sep;
    let center =
        f64::from(k_sign) * k_eff * (scene.a_true + 2.0 * scene.v_l * omega_ref);
    let span = scene.scan_span_fringes * std::f64::consts::TAU / t2;
    let v_mean = [-scene.v_l, 0.0, 0.0];
    // Cloud state defined at the first pulse so that the mean position at
    // the pi pulse equals atom_offset.
    let center_pos = [
        scene.atom_offset[0] + scene.v_l * scene.t_sep,
        scene.atom_offset[1],
        scene.atom_offset[2] - scene.a_true * t2 / 2.0,
    ];
    let mut alphas = Vec::with_capacity(scene.n_shots);
    let mut p2s = Vec::with_capacity(scene.n_shots);
    for shot in 0..scene.n_shots {
        let alpha =
            center - span / 2.0 + span * shot as f64 / (scene.n_shots - 1).max(1) as f64;
        let shot_stream = (scan_id * scene.n_shots as u64 + shot as u64) * 8 + CH_DETECT;
        let ens = AtomEnsemble::generate(
            &scene.species,
            scene.n_atoms_mc,
            scene.temperature,
            scene.sigma_r,
            center_pos,
            v_mean,
            crate::rng::derive_seed(seed, shot_stream + 1),
        );
        let cfg = InterferometerConfig {
            k_eff,
            t_sep: scene.t_sep,
            k_sign,
            v_sign: 1, // launch direction already baked into v_mean
            chirp_rate: alpha,
            beam_waist: 10.1e-3,
            t_pi: 0.0,
        };
        let gravity = [0.0, 0.0, scene.a_true];
        let phases: Result<Vec<f64>, CoreError> = (0..scene.n_atoms_mc)
            .map(|i| {
                crate::interferometer::phase_oracle(
                    &cfg,
                    &ens.atom(i, -scene.t_sep),
                    gravity,
                    |t| drive.tilt_at(t, scene.cycle_period),
                    |_| 0.0,
                )
            })
            .collect();
        let mut rng = stream_rng(seed, shot_stream);
        let out = detect(&phases?, &scene.detection, &mut rng);
        alphas.push(alpha);
        p2s.push(out.p2);
    }
    let fit = fit_fringe(&alphas, &p2s, scene.t_sep)?;
    Ok(ScanResult {
        alpha_star: fit.alpha_star,
        contrast: fit.contrast,
        // Covariance is in (mean, contrast, phase) units; phase -> chirp rate.
        alpha_err: fit.covariance[2][2].sqrt() / t2,
        scan_alphas: alphas,
        scan_p2s: p2s,
    })
}

/// The four fringe-centering chirp rates of one dynamic measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicAlphas {
    pub pk_drive: f64,
    pub mk_drive: f64,
    pub pk_zero: f64,
    pub mk_zero: f64,
}

/// Dynamic rotation from the fringe shifts between drive-on and drive-off
/// scans at both wave-vector signs:
///
///   Omega = [(a_+k^d - a_-k^d) - (a_+k^0 - a_-k^0)] / 4 v k
pub fn demodulate_dynamic(alphas: &DynamicAlphas, v_l: f64, k_eff: f64) -> f64 {
    ((alphas.pk_drive - alphas.mk_drive) - (alphas.pk_zero - alphas.mk_zero))
        / (4.0 * v_l * k_eff)
}

/// Classical gyroscope projection onto a misaligned X axis.
pub fn project_classical_rotation(omega_x: f64, omega_y: f64, beta: f64) -> f64 {
    omega_x * beta.cos() + omega_y * beta.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::contrast_decay;
    use approx::assert_relative_eq;

    const K: f64 = 1.6108e7;
    const T: f64 = 0.04;
    const V: f64 = 0.082;

    fn fringe(p2: f64, contrast: f64) -> FringeOutput {
        FringeOutput {
            p2,
            contrast,
            mean: 0.5,
            delta_phi: 0.0,
            clamp_events: 0,
        }
    }

    /// Ideal pair of detections around a lock at `alpha` for a true phase
    /// rate `phase_rate`, with additive per-shot phase noise.
    fn ideal_pair(alpha: f64, phase_rate: f64, contrast: f64, noise: [f64; 2]) -> [FringeOutput; 2] {
        let t2 = T * T;
        let delta = std::f64::consts::FRAC_PI_2 / t2;
        let p = |a: f64, n: f64| {
            fringe(
                0.5 - 0.5 * contrast * ((phase_rate - a) * t2 + n).cos(),
                contrast,
            )
        };
        [p(alpha + delta, noise[0]), p(alpha - delta, noise[1])]
    }

    #[test]
    fn mid_fringe_converges_from_offset() {
        let phase_rate = 100.0;
        let t2 = T * T;
        let mut lock = LockState::new(phase_rate - 0.3 / t2);
        for _ in 0..20 {
            let [p, m] = ideal_pair(lock.alpha, phase_rate, 0.25, [0.0; 2]);
            let (next, _) = mid_fringe_step(&lock, &p, &m, 0.6, T).unwrap();
            lock = next;
        }
        assert!(
            ((lock.alpha - phase_rate) * t2).abs() < 1e-3,
            "residual {}",
            (lock.alpha - phase_rate) * t2
        );
    }

    #[test]
    fn mid_fringe_locked_point_is_fixed() {
        let lock = LockState::new(42.0);
        let [p, m] = ideal_pair(42.0, 42.0, 0.25, [0.0; 2]);
        let (next, inst) = mid_fringe_step(&lock, &p, &m, 0.6, T).unwrap();
        assert_relative_eq!(next.alpha, 42.0, epsilon = 1e-9);
        assert_relative_eq!(inst, 42.0, epsilon = 1e-9);
    }

    #[test]
    fn mid_fringe_instantaneous_estimate_is_exact() {
        let t2 = T * T;
        let phase_rate = 7.0;
        let lock = LockState::new(phase_rate - 0.47 / t2);
        let [p, m] = ideal_pair(lock.alpha, phase_rate, 0.3, [0.0; 2]);
        let (_, inst) = mid_fringe_step(&lock, &p, &m, 0.6, T).unwrap();
        assert_relative_eq!(inst, phase_rate, max_relative = 1e-9);
    }

    #[test]
    fn mid_fringe_loss_after_three_strikes() {
        let mut lock = LockState::new(0.0);
        // Error signal pinned at full contrast: out of the linear range.
        let p = fringe(0.25, 0.25);
        let m = fringe(0.75, 0.25);
        for i in 0..3 {
            match mid_fringe_step(&lock, &p, &m, 0.0, T) {
                Ok((next, _)) => {
                    assert!(i < 2);
                    lock = next;
                }
                Err(CoreError::FringeLost(n)) => {
                    assert_eq!(i, 2);
                    assert_eq!(n, 3);
                    return;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        panic!("lock never declared lost");
    }

    #[test]
    fn mid_fringe_steady_state_jitter() {
        // White per-shot phase noise sigma_phi drives an alpha jitter of
        // (sigma_phi / sqrt 2) sqrt(g / (2 - g)) / T^2: the error estimate
        // averages the two shots' noise, then the one-pole loop shapes it.
        let sigma_phi = 0.1;
        let gain = 0.6;
        let t2 = T * T;
        let mut rng = stream_rng(17, 0);
        let mut lock = LockState::new(0.0);
        let mut samples = Vec::new();
        use rand::Rng;
        for i in 0..30_000 {
            let n = [
                sigma_phi * rng.sample::<f64, _>(rand_distr::StandardNormal),
                sigma_phi * rng.sample::<f64, _>(rand_distr::StandardNormal),
            ];
            let [p, m] = ideal_pair(lock.alpha, 0.0, 0.25, n);
            let (next, _) = mid_fringe_step(&lock, &p, &m, gain, T).unwrap();
            lock = next;
            if i > 100 {
                samples.push(lock.alpha * t2);
            }
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let expect = sigma_phi / 2f64.sqrt() * (gain / (2.0 - gain)).sqrt();
        assert_relative_eq!(var.sqrt(), expect, max_relative = 0.1);
    }

    fn forward_alphas(a: f64, omega: f64) -> StaticAlphas {
        let al = |s_k: f64, s_v: f64| s_k * K * (a - 2.0 * s_v * V * omega);
        StaticAlphas {
            pk_pv: al(1.0, 1.0),
            mk_pv: al(-1.0, 1.0),
            pk_mv: al(1.0, -1.0),
            mk_mv: al(-1.0, -1.0),
        }
    }

    #[test]
    fn static_demodulation_round_trip_exact() {
        let (a_in, w_in) = (9.80883, 4.82e-5);
        let alphas = forward_alphas(a_in, w_in);
        let (a, w) = demodulate_static(&alphas, &[0.0; 8], true, V, K);
        assert_relative_eq!(a, a_in, max_relative = 1e-12);
        // Omega recovery cancels k*a ~ 1.6e8 against a Coriolis term ~5e2,
        // so float round-off limits it to ~1e-10 relative.
        assert_relative_eq!(w, w_in, max_relative = 1e-10);
    }

    #[test]
    fn k_even_systematic_rejected() {
        let (a_in, w_in) = (9.80883, 4.82e-5);
        let mut alphas = forward_alphas(a_in, w_in);
        // Same-sign offset for +/-k: even parity in k, e.g. a light shift.
        let off = 250.0;
        alphas.pk_pv += off;
        alphas.mk_pv += off;
        alphas.pk_mv += off;
        alphas.mk_mv += off;
        let (a, w) = demodulate_static(&alphas, &[0.0; 8], false, V, K);
        assert_relative_eq!(a, a_in, max_relative = 1e-12);
        assert_relative_eq!(w, w_in, max_relative = 1e-10);
    }

    #[test]
    fn v_even_term_shifts_a_not_omega() {
        let (a_in, w_in) = (9.80883, 4.82e-5);
        let mut alphas = forward_alphas(a_in, w_in);
        // Centrifugal-like: odd in k (a real acceleration), even in v.
        let da = 1.3e-4;
        alphas.pk_pv += K * da;
        alphas.mk_pv -= K * da;
        alphas.pk_mv += K * da;
        alphas.mk_mv -= K * da;
        let (a, w) = demodulate_static(&alphas, &[0.0; 8], false, V, K);
        assert_relative_eq!(w, w_in, max_relative = 1e-10);
        assert_relative_eq!(a, a_in + da, max_relative = 1e-10);
    }

    #[test]
    fn vibration_correction_cancels_known_difference() {
        let (a_in, w_in) = (0.0, 3.0e-5);
        let mut alphas = forward_alphas(a_in, w_in);
        // Vibration hits +v pairs and -v pairs differently.
        let (vib_pv, vib_mv) = (2.0e-6, -1.0e-6);
        alphas.pk_pv += K * vib_pv;
        alphas.mk_pv -= K * vib_pv;
        alphas.pk_mv += K * vib_mv;
        alphas.mk_mv -= K * vib_mv;
        let mut a_conv = [0.0; 8];
        for (i, a) in a_conv.iter_mut().enumerate() {
            *a = if i < 4 { vib_pv } else { vib_mv };
        }
        let (a_raw, w_raw) = demodulate_static(&alphas, &a_conv, false, V, K);
        assert!((w_raw - w_in).abs() > 1e-6);
        let (a, w) = demodulate_static(&alphas, &a_conv, true, V, K);
        assert_relative_eq!(w, w_in, max_relative = 1e-9);
        assert_relative_eq!(a + 0.0, a_in, epsilon = 1e-12);
        assert!((a_raw - a_in).abs() > 1e-7);
    }

    fn quiet_scene() -> StaticScene {
        StaticScene {
            species: Species::rb87(),
            a_true: 9.80883,
            omega_true: 4.82e-5,
            n_atoms: 1_000_000,
            detection: DetectionModel {
                contrast: 0.25,
                mean: 0.5,
                noise_rms: 0.0,
            },
            phase_noise_rms: 0.0,
            vibration: VibrationModel {
                psd_shape: vec![],
                rms: 0.0,
                residual_fraction: 0.2,
            },
            vib_rate: 250.0,
            accel_sensor: ClassicalSensorModel {
                white_psd: 0.0,
                bias_rw_coeff: 0.0,
                initial_bias: 0.0,
                scale_error: 0.0,
            },
            correct_vibration: true,
            accel_drift: None,
            omega_drift: None,
            gain: 0.6,
        }
    }

    #[test]
    fn noiseless_campaign_recovers_truth() {
        // Quantum projection noise cannot be switched off; a huge atom
        // number makes it negligible instead.
        let mut scene = quiet_scene();
        scene.n_atoms = 4_000_000_000;
        let cfg = CycleConfig::standard(0.5, T, V);
        let recs = run_static_campaign(120.0, &scene, &cfg, 3).unwrap();
        assert_eq!(recs.len(), 30);
        for r in &recs {
            assert_relative_eq!(r.a, scene.a_true, max_relative = 1e-8);
            assert!((r.omega - scene.omega_true).abs() < 3e-8, "{}", r.omega);
        }
    }

    #[test]
    fn white_noise_campaign_averages_down() {
        let mut scene = quiet_scene();
        scene.phase_noise_rms = 0.05;
        let cfg = CycleConfig::standard(0.5, T, V);
        let recs = run_static_campaign(3200.0, &scene, &cfg, 11).unwrap();
        let omegas: Vec<f64> = recs.iter().map(|r| r.omega).collect();
        let curve = crate::analysis::allan_deviation(&omegas, 4.0, &[4.0, 64.0]).unwrap();
        // White phase noise: ADEV scales as tau^{-1/2}.
        assert_relative_eq!(curve.sigmas[0] / curve.sigmas[1], 4.0, max_relative = 0.25);
        // Level oracle: each pair's instantaneous chirp estimate carries
        // sigma_phi/sqrt(2)/T^2, and four independent pairs feed the 1/(8vk)
        // combination.
        let t2 = T * T;
        let sigma_alpha = scene.phase_noise_rms / 2f64.sqrt() / t2;
        let sigma_omega_block = 2.0 * sigma_alpha / (8.0 * V * K);
        assert_relative_eq!(curve.sigmas[0], sigma_omega_block, max_relative = 0.15);
    }

    #[test]
    fn campaign_is_deterministic() {
        let mut scene = quiet_scene();
        scene.phase_noise_rms = 0.02;
        scene.vibration = VibrationModel {
            psd_shape: vec![
                crate::noise::PsdPoint {
                    freq_hz: 1.0,
                    level: 1.0,
                },
                crate::noise::PsdPoint {
                    freq_hz: 40.0,
                    level: 1.0,
                },
            ],
            rms: 1.0e-5,
            residual_fraction: 0.2,
        };
        let cfg = CycleConfig::standard(0.5, T, V);
        let a = run_static_campaign(256.0, &scene, &cfg, 5).unwrap();
        let b = run_static_campaign(256.0, &scene, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = run_static_campaign(256.0, &scene, &cfg, 6).unwrap();
        assert_ne!(a, c);
    }

    fn dyn_scene() -> DynamicScene {
        DynamicScene {
            species: Species::rb87(),
            v_l: V,
            a_true: 0.0,
            temperature: 1e-6,
            sigma_r: 0.5e-3,
            atom_offset: [0.0; 3],
            n_atoms_mc: 2000,
            detection: DetectionModel {
                contrast: 0.25,
                mean: 0.5,
                noise_rms: 0.0,
            },
            t_sep: T,
            cycle_period: 1.0,
            n_shots: 200,
            scan_span_fringes: 2.5,
        }
    }

    fn drive(omega_d: f64, phi0: f64) -> DynamicDrive {
        DynamicDrive {
            omega_d,
            phi0,
            axis: [1.0, 0.0, 0.0],
            beta_plus: 0.0,
            beta_minus: 0.0,
        }
    }

    #[test]
    fn zero_drive_scan_sits_on_static_center() {
        let mut scene = dyn_scene();
        scene.a_true = 0.02;
        let res = run_fringe_scan(&scene, &drive(0.0, 0.0), 1, 0.0, 7, 0).unwrap();
        let center = scene.species.k_eff() * scene.a_true;
        assert!(
            (res.alpha_star - center).abs() * T * T < 0.05,
            "alpha_star off by {} rad",
            (res.alpha_star - center) * T * T
        );
        assert_relative_eq!(res.contrast, 0.25, max_relative = 0.1);
    }

    #[test]
    fn contrast_follows_decay_law() {
        let scene = dyn_scene();
        let c0 = run_fringe_scan(&scene, &drive(0.0, 0.0), 1, 0.0, 7, 0).unwrap();
        let c2 = run_fringe_scan(&scene, &drive(2.0e-3, 0.0), 1, 2.0e-3, 7, 1).unwrap();
        let sv = scene.species.thermal_sigma_v(scene.temperature);
        // The drive averages over the pulse window; use the effective
        // (sinc-attenuated) amplitude in the decay law.
        let w = std::f64::consts::TAU / scene.cycle_period;
        let eff = (w * T).sin() / (w * T);
        let expect =
            contrast_decay(scene.species.k_eff(), sv, T, 2.0e-3 * eff);
        assert_relative_eq!(c2.contrast / c0.contrast, expect, max_relative = 0.12);
    }

    #[test]
    fn dynamic_demodulation_recovers_drive() {
        let scene = dyn_scene();
        let om = 1.0e-3;
        let d = drive(om, 0.0);
        let z = drive(0.0, 0.0);
        let alphas = DynamicAlphas {
            pk_drive: run_fringe_scan(&scene, &d, 1, om, 7, 0).unwrap().alpha_star,
            mk_drive: run_fringe_scan(&scene, &d, -1, om, 7, 1).unwrap().alpha_star,
            pk_zero: run_fringe_scan(&scene, &z, 1, 0.0, 7, 2).unwrap().alpha_star,
            mk_zero: run_fringe_scan(&scene, &z, -1, 0.0, 7, 3).unwrap().alpha_star,
        };
        let rec = demodulate_dynamic(&alphas, scene.v_l, scene.species.k_eff());
        let w = std::f64::consts::TAU / scene.cycle_period;
        let eff = om * (w * T).sin() / (w * T);
        assert_relative_eq!(rec, eff, max_relative = 0.03);
    }

    #[test]
    fn demodulate_dynamic_trivials() {
        let same = DynamicAlphas {
            pk_drive: 5.0,
            mk_drive: 5.0,
            pk_zero: 5.0,
            mk_zero: 5.0,
        };
        assert_eq!(demodulate_dynamic(&same, V, K), 0.0);
        // Forward model of a constant rotation sensed via v_sign = -1.
        let om = 2.0e-4;
        let alphas = DynamicAlphas {
            pk_drive: K * (0.0 + 2.0 * V * om),
            mk_drive: -K * (0.0 + 2.0 * V * om),
            pk_zero: 0.0,
            mk_zero: 0.0,
        };
        assert_relative_eq!(demodulate_dynamic(&alphas, V, K), om, max_relative = 1e-12);
    }

    #[test]
    fn classical_projection_trivials() {
        assert_relative_eq!(project_classical_rotation(2.0, 3.0, 0.0), 2.0);
        assert_relative_eq!(
            project_classical_rotation(2.0, 3.0, std::f64::consts::FRAC_PI_2),
            3.0,
            epsilon = 1e-12
        );
        let beta = 5.0f64.to_radians();
        assert_relative_eq!(
            project_classical_rotation(1.0, 0.0, beta),
            0.9962,
            max_relative = 1e-4
        );
    }
}
