//! Mach-Zehnder phase models and output-population detection.
//!
//! Two phase routes are provided and checked against each other:
//!
//! - [`phase_closed_form`], valid for constant acceleration and rotation,
//! - [`phase_oracle`], a three-pulse laser-phase construction that samples
//!   the mirror tilt and displacement at the pulse times and therefore also
//!   handles time-varying rotation.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::physics::{add, cross, dot, propagate, scale, BallisticState, Species, Vec3};
use crate::rng::stream_rng;

/// Small-angle validity bound for the mirror tilt in [`phase_oracle`].
pub const TILT_SMALL_ANGLE_BOUND: f64 = 10e-3;

/// Geometry and timing of one interferometer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    /// Effective wave vector magnitude, rad/m.
    pub k_eff: f64,
    /// Pulse separation T, s.
    pub t_sep: f64,
    /// Wave-vector sign (+1 or -1).
    pub k_sign: i8,
    /// Launch-velocity sign (+1 or -1).
    pub v_sign: i8,
    /// Chirp rate alpha, rad/s^2.
    pub chirp_rate: f64,
    /// 1/e^2 beam waist, m.
    pub beam_waist: f64,
    /// Absolute time of the second (pi) pulse, s.
    pub t_pi: f64,
}

impl InterferometerConfig {
    /// Signed effective wave vector along the beam axis z.
    pub fn k_vec(&self) -> Vec3 {
        [0.0, 0.0, f64::from(self.k_sign) * self.k_eff]
    }

    pub fn pulse_times(&self) -> [f64; 3] {
        [self.t_pi - self.t_sep, self.t_pi, self.t_pi + self.t_sep]
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.t_sep <= 0.0 || self.beam_waist <= 0.0 || self.k_eff <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "t_sep, beam_waist and k_eff must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Closed-form phase shift for constant a, Omega, Omega_dot:
///
/// dPhi = [k . (a - 2 Omega x v_l - Omega_dot x r - Omega x (Omega x r)) - alpha] T^2
///
/// `v_l` is the launch velocity of the +v configuration; the config's
/// `v_sign` flips it.
pub fn phase_closed_form(
    cfg: &InterferometerConfig,
    a: Vec3,
    omega: Vec3,
    omega_dot: Vec3,
    r: Vec3,
    v_l: Vec3,
) -> f64 {
    let v = scale(v_l, f64::from(cfg.v_sign));
    let coriolis = scale(cross(omega, v), 2.0);
    let euler = cross(omega_dot, r);
    let centrifugal = cross(omega, cross(omega, r));
    let accel = [
        a[0] - coriolis[0] - euler[0] - centrifugal[0],
        a[1] - coriolis[1] - euler[1] - centrifugal[1],
        a[2] - coriolis[2] - euler[2] - centrifugal[2],
    ];
    (dot(cfg.k_vec(), accel) - cfg.chirp_rate) * cfg.t_sep * cfg.t_sep
}

/// Per-atom phase from the laser phase sampled at the three pulse times.
///
/// At pulse time t_i the laser phase carved on the atom is
///
///   phi_i = k_signed * (z_atom - z_mirror - x_atom * theta(t_i)) - alpha t_i^2 / 2
///
/// and the interferometer accumulates phi_1 - 2 phi_2 + phi_3. The tilt
/// axis passes through the mirror center; `mirror_disp` is the mirror
/// displacement along the beam (e.g. integrated vibration).
pub fn phase_oracle(
    cfg: &InterferometerConfig,
    atom: &BallisticState,
    gravity: Vec3,
    mirror_tilt: impl Fn(f64) -> f64,
    mirror_disp: impl Fn(f64) -> f64,
) -> Result<f64, CoreError> {
    let k = f64::from(cfg.k_sign) * cfg.k_eff;
    let mut phases = [0.0; 3];
    for (slot, t_i) in phases.iter_mut().zip(cfg.pulse_times()) {
        let theta = mirror_tilt(t_i);
        if theta.abs() > TILT_SMALL_ANGLE_BOUND {
            return Err(CoreError::TiltTooLarge(theta.abs(), TILT_SMALL_ANGLE_BOUND));
        }
        let state = propagate(atom, t_i - atom.time, gravity);
        let z_rel = state.position[2] - mirror_disp(t_i) - state.position[0] * theta;
        *slot = k * z_rel - 0.5 * cfg.chirp_rate * t_i * t_i;
    }
    Ok(phases[0] - 2.0 * phases[1] + phases[2])
}

/// Fringe contrast under a dynamic rotation of amplitude omega_d for a cloud
/// of velocity dispersion sigma_v: exp(-2 k^2 sigma_v^2 T^4 omega_d^2).
pub fn contrast_decay(k_eff: f64, sigma_v: f64, t_sep: f64, omega_d: f64) -> f64 {
    (-2.0 * k_eff.powi(2) * sigma_v.powi(2) * t_sep.powi(4) * omega_d.powi(2)).exp()
}

/// Monte Carlo atom cloud. Positions and velocities are drawn per atom from
/// a stream keyed on (rng_seed, atom index), so generation is bitwise
/// independent of threading.
#[derive(Debug, Clone)]
pub struct AtomEnsemble {
    pub n_atoms: usize,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub rng_seed: u64,
    /// Generating temperature, K.
    pub temperature: f64,
}

impl AtomEnsemble {
    /// Thermal cloud: isotropic Gaussian velocities at `temperature`,
    /// Gaussian positions of rms radius `sigma_r`, centered on `center` with
    /// mean velocity `v_mean`.
    pub fn generate(
        species: &Species,
        n_atoms: usize,
        temperature: f64,
        sigma_r: f64,
        center: Vec3,
        v_mean: Vec3,
        rng_seed: u64,
    ) -> Self {
        let sigma_v = species.thermal_sigma_v(temperature);
        let mut positions = Vec::with_capacity(n_atoms);
        let mut velocities = Vec::with_capacity(n_atoms);
        for i in 0..n_atoms {
            let mut rng = stream_rng(rng_seed, i as u64);
            let mut gauss = || -> f64 { rng.sample(StandardNormal) };
            positions.push(add(center, [
                sigma_r * gauss(),
                sigma_r * gauss(),
                sigma_r * gauss(),
            ]));
            velocities.push(add(v_mean, [
                sigma_v * gauss(),
                sigma_v * gauss(),
                sigma_v * gauss(),
            ]));
        }
        AtomEnsemble {
            n_atoms,
            positions,
            velocities,
            rng_seed,
            temperature,
        }
    }

    pub fn atom(&self, i: usize, time: f64) -> BallisticState {
        BallisticState {
            position: self.positions[i],
            velocity: self.velocities[i],
            time,
        }
    }
}

/// Detection-side parameters of the fringe model P2 = P_m - (C/2) cos(dPhi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    /// Fringe contrast C.
    pub contrast: f64,
    /// Fringe mean P_m.
    pub mean: f64,
    /// Additive Gaussian rms noise on the aggregated P2.
    pub noise_rms: f64,
}

/// One detected shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeOutput {
    /// Measured proportion of atoms in F = 2, clamped to [0, 1].
    pub p2: f64,
    /// Realized contrast C |<e^{i phi}>| over the ensemble.
    pub contrast: f64,
    /// Fringe mean P_m.
    pub mean: f64,
    /// Circular-mean ensemble phase, rad.
    pub delta_phi: f64,
    /// Number of clamping events (per-atom probability or final P2).
    pub clamp_events: u64,
}

fn clamp_unit(x: f64, events: &mut u64) -> f64 {
    if x < 0.0 {
        *events += 1;
        0.0
    } else if x > 1.0 {
        *events += 1;
        1.0
    } else {
        x
    }
}

/// Quantum-projection detection over an ensemble of per-atom phases: each
/// atom is a Bernoulli draw with p = P_m - (C/2) cos(phi), the aggregate
/// gets one Gaussian detection-noise draw on top.
pub fn detect(
    phases: &[f64],
    model: &DetectionModel,
    rng: &mut impl Rng,
) -> FringeOutput {
    assert!(!phases.is_empty(), "detect needs at least one atom");
    let mut clamp_events = 0u64;
    let (mut cos_sum, mut sin_sum) = (0.0, 0.0);
    let mut hits = 0u64;
    for &phi in phases {
        cos_sum += phi.cos();
        sin_sum += phi.sin();
        let p = clamp_unit(
            model.mean - 0.5 * model.contrast * phi.cos(),
            &mut clamp_events,
        );
        if rng.gen::<f64>() < p {
            hits += 1;
        }
    }
    let n = phases.len() as f64;
    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * model.noise_rms;
    let p2 = clamp_unit(hits as f64 / n + noise, &mut clamp_events);
    FringeOutput {
        p2,
        contrast: model.contrast * (cos_sum / n).hypot(sin_sum / n),
        mean: model.mean,
        delta_phi: sin_sum.atan2(cos_sum),
        clamp_events,
    }
}

/// Fast path for a cloud whose atoms all share one phase: the per-atom
/// Bernoulli draws collapse to a single binomial sample. `n_atoms = 0`
/// disables projection noise (the infinite-atom limit).
pub fn detect_uniform(
    phase: f64,
    n_atoms: u64,
    model: &DetectionModel,
    rng: &mut impl Rng,
) -> FringeOutput {
    let mut clamp_events = 0u64;
    let p = clamp_unit(
        model.mean - 0.5 * model.contrast * phase.cos(),
        &mut clamp_events,
    );
    let fraction = if n_atoms == 0 {
        p
    } else {
        let hits = Binomial::new(n_atoms, p).expect("valid binomial").sample(rng);
        hits as f64 / n_atoms as f64
    };
    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * model.noise_rms;
    let p2 = clamp_unit(fraction + noise, &mut clamp_events);
    FringeOutput {
        p2,
        contrast: model.contrast,
        mean: model.mean,
        delta_phi: phase,
        clamp_events,
    }
}

/// Quantum-projection-noise rotation floor 1/(C sqrt(N)) / (2 k v T^2
/// sqrt(rate)), rad/s/sqrt(Hz), for a shot rate in Hz.
pub fn qpn_rotation_floor(
    contrast: f64,
    n_atoms: f64,
    k_eff: f64,
    v_l: f64,
    t_sep: f64,
    rate: f64,
) -> f64 {
    let sigma_phi = 1.0 / (contrast * n_atoms.sqrt());
    sigma_phi / (2.0 * k_eff * v_l * t_sep * t_sep * rate.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::G_STD;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg(k_sign: i8, v_sign: i8, chirp: f64) -> InterferometerConfig {
        InterferometerConfig {
            k_eff: 1.6108e7,
            t_sep: 0.04,
            k_sign,
            v_sign,
            chirp_rate: chirp,
            beam_waist: 10.1e-3,
            t_pi: 0.065,
        }
    }

    #[test]
    fn chirp_compensates_gravity() {
        let k = 1.6108e7;
        let c = cfg(1, 1, k * G_STD);
        let phi = phase_closed_form(&c, [0.0, 0.0, G_STD], [0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]);
        assert!(phi.abs() < 1e-9, "phi = {phi}");
    }

    #[test]
    fn coriolis_term_hand_value() {
        // Earth-rate projection 4.82e-5 rad/s, v_l = 0.082 m/s:
        // |2 k v Omega T^2| = 0.2037 rad.
        let c = cfg(1, 1, 0.0);
        let omega = [0.0, 4.82e-5, 0.0];
        let v_l = [0.082, 0.0, 0.0];
        let phi = phase_closed_form(&c, [0.0; 3], omega, [0.0; 3], [0.0; 3], v_l);
        assert_relative_eq!(phi.abs(), 0.2037, max_relative = 5e-4);
    }

    #[test]
    fn v_sign_flip_isolates_coriolis() {
        let omega = [0.0, 3.0e-5, 0.0];
        let v_l = [0.082, 0.0, 0.0];
        let a = [0.0, 0.0, 0.0];
        let cp = cfg(1, 1, 0.0);
        let cm = cfg(1, -1, 0.0);
        let phi_p = phase_closed_form(&cp, a, omega, [0.0; 3], [0.0; 3], v_l);
        let phi_m = phase_closed_form(&cm, a, omega, [0.0; 3], [0.0; 3], v_l);
        let expect = 4.0 * cp.k_eff * 0.082 * 3.0e-5 * cp.t_sep * cp.t_sep;
        assert_relative_eq!((phi_p - phi_m).abs(), expect, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_odd_under_k_and_chirp_flip() {
        let a = [0.1, -0.2, 9.8];
        let omega = [1e-5, 2e-5, -3e-5];
        let od = [1e-6, 0.0, 2e-6];
        let r = [0.01, 0.0, -0.002];
        let v_l = [0.082, 0.0, 0.0];
        let p = phase_closed_form(&cfg(1, 1, 123.0), a, omega, od, r, v_l);
        let m = phase_closed_form(&cfg(-1, 1, -123.0), a, omega, od, r, v_l);
        assert_relative_eq!(p, -m, max_relative = 1e-12);
    }

    #[test]
    fn centrifugal_even_coriolis_odd_in_v_sign() {
        let omega = [0.0, 2.0e-3, 0.0];
        let r = [0.01, 0.0, 0.05];
        let v_l = [0.082, 0.0, 0.0];
        let k_eff = 1.6108e7;
        let t2 = 0.04f64 * 0.04;
        let phi = |v_sign: i8| {
            phase_closed_form(&cfg(1, v_sign, 0.0), [0.0; 3], omega, [0.0; 3], r, v_l)
        };
        // Half-difference = Coriolis part, half-sum = centrifugal part.
        // Omega along +y is a negative rotation in this crate's convention
        // (positive axis is x cross z = -y), hence the positive phase.
        let coriolis = 0.5 * (phi(1) - phi(-1));
        let centrifugal = 0.5 * (phi(1) + phi(-1));
        assert_relative_eq!(
            coriolis,
            2.0 * k_eff * omega[1] * v_l[0] * t2,
            max_relative = 1e-9
        );
        let expect_cf = -k_eff * dot([0.0, 0.0, 1.0], cross(omega, cross(omega, r))) * t2;
        assert_relative_eq!(centrifugal, expect_cf, max_relative = 1e-9);
    }

    #[test]
    fn oracle_matches_closed_form_for_constant_rotation() {
        // theta(t) = Omega t reproduces the Coriolis term to first order.
        let c = cfg(1, 1, 0.0);
        let omega = 4.82e-5;
        let v = 0.082;
        let atom = BallisticState {
            position: [0.0; 3],
            velocity: [v, 0.0, 0.0],
            time: 0.0,
        };
        let phi = phase_oracle(&c, &atom, [0.0; 3], |t| omega * t, |_| 0.0).unwrap();
        let expect = -2.0 * c.k_eff * omega * v * c.t_sep * c.t_sep;
        assert_relative_eq!(phi, expect, max_relative = 1e-9);
    }

    #[test]
    fn oracle_zero_for_static_mirror_with_matched_chirp() {
        let k = 1.6108e7;
        let c = cfg(1, 1, k * G_STD);
        let atom = BallisticState {
            position: [0.0, 0.0, 0.2],
            velocity: [0.082, 0.0, 0.0],
            time: 0.0,
        };
        // Relative acceleration +G_STD along z (sign convention: the chirp
        // term compensates a positive measured g).
        let phi = phase_oracle(&c, &atom, [0.0, 0.0, G_STD], |_| 0.0, |_| 0.0).unwrap();
        assert!(phi.abs() < 1e-7, "phi = {phi}");
    }

    #[test]
    fn oracle_constant_tilt_annihilated() {
        let c = cfg(1, 1, 0.0);
        let atom = BallisticState {
            position: [0.005, 0.0, 0.0],
            velocity: [0.082, 0.0, 0.0],
            time: 0.0,
        };
        let phi = phase_oracle(&c, &atom, [0.0; 3], |_| 2.0e-3, |_| 0.0).unwrap();
        assert!(phi.abs() < 1e-9, "phi = {phi}");
    }

    #[test]
    fn oracle_rejects_large_tilt() {
        let c = cfg(1, 1, 0.0);
        let atom = BallisticState {
            position: [0.0; 3],
            velocity: [0.0; 3],
            time: 0.0,
        };
        let err = phase_oracle(&c, &atom, [0.0; 3], |_| 0.02, |_| 0.0);
        assert!(matches!(err, Err(CoreError::TiltTooLarge(_, _))));
    }

    #[test]
    fn contrast_decay_basics() {
        assert_eq!(contrast_decay(1.6108e7, 9.781e-3, 0.04, 0.0), 1.0);
        // 1/e point: solve 2 k^2 sigma^2 T^4 Omega^2 = 1.
        let k = 1.6108e7;
        let sv = 9.781e-3;
        let t = 0.04;
        let omega_e = 1.0 / (2.0f64.sqrt() * k * sv * t * t);
        assert_relative_eq!(omega_e, 2.80e-3, max_relative = 2e-3);
        assert_relative_eq!(
            contrast_decay(k, sv, t, omega_e),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ensemble_velocity_dispersion_matches_temperature() {
        let species = Species::rb87();
        let n = 20_000;
        let ens = AtomEnsemble::generate(&species, n, 1e-6, 1e-3, [0.0; 3], [0.0; 3], 42);
        let target = species.thermal_sigma_v(1e-6);
        let var: f64 =
            ens.velocities.iter().map(|v| v[0] * v[0]).sum::<f64>() / n as f64;
        let sigma = var.sqrt();
        // 3-sigma statistical bound on the sample std: sigma/sqrt(2N).
        let bound = 3.0 * target / (2.0 * n as f64).sqrt();
        assert!((sigma - target).abs() < bound, "{sigma} vs {target}");
    }

    #[test]
    fn detect_all_atoms_at_pi() {
        let model = DetectionModel {
            contrast: 1.0,
            mean: 0.5,
            noise_rms: 0.0,
        };
        let phases = vec![std::f64::consts::PI; 50_000];
        let mut rng = stream_rng(1, 0);
        let out = detect(&phases, &model, &mut rng);
        assert!(out.p2 > 0.999, "p2 = {}", out.p2);
        assert_relative_eq!(out.contrast, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn quantum_projection_noise_scaling() {
        let model = DetectionModel {
            contrast: 1.0,
            mean: 0.5,
            noise_rms: 0.0,
        };
        let n = 1000u64;
        let reps = 4000;
        let mut rng = stream_rng(2, 0);
        // p = 0.5 at phase pi/2.
        let samples: Vec<f64> = (0..reps)
            .map(|_| detect_uniform(std::f64::consts::FRAC_PI_2, n, &model, &mut rng).p2)
            .collect();
        let mean = samples.iter().sum::<f64>() / reps as f64;
        let var =
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let expect = (0.25 / n as f64).sqrt();
        assert_relative_eq!(var.sqrt(), expect, max_relative = 0.1);
    }

    #[test]
    fn detect_p2_clamped_with_huge_noise() {
        let model = DetectionModel {
            contrast: 0.2,
            mean: 0.5,
            noise_rms: 10.0,
        };
        let mut rng = stream_rng(3, 0);
        for _ in 0..50 {
            let out = detect_uniform(0.3, 100, &model, &mut rng);
            assert!((0.0..=1.0).contains(&out.p2));
        }
    }

    #[test]
    fn qpn_floor_at_reference_operating_point() {
        // Fitted defaults (C, N); calibrated so the floor lands on the
        // quoted 3.5e-7 rad/s/sqrt(Hz) at the 2 Hz cycle rate.
        let floor = qpn_rotation_floor(0.25, 3.66e6, 1.6108e7, 0.082, 0.04, 2.0);
        assert_relative_eq!(floor, 3.5e-7, max_relative = 0.02);
    }

    proptest! {
        #[test]
        fn oracle_equals_closed_form_over_rotation_range(
            omega in -4e-3..4e-3f64,
            v in prop_oneof![Just(0.082f64), Just(-0.082f64)],
        ) {
            let c = cfg(1, 1, 0.0);
            let atom = BallisticState {
                position: [0.0; 3],
                velocity: [v, 0.0, 0.0],
                time: 0.0,
            };
            let oracle = phase_oracle(&c, &atom, [0.0; 3], |t| omega * t, |_| 0.0).unwrap();
            let closed = -2.0 * c.k_eff * omega * v * c.t_sep * c.t_sep;
            if closed.abs() > 1e-12 {
                prop_assert!(((oracle - closed) / closed).abs() < 1e-6);
            } else {
                prop_assert!(oracle.abs() < 1e-9);
            }
        }
    }
}
