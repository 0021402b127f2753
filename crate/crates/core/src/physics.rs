//! Species data, Stern-Gerlach launch kinematics and ballistic trajectories.

use serde::{Deserialize, Serialize};

use crate::constants::{
    HBAR, K_B, MU_B, RB87_D2_WAVELENGTH, RB87_G_F, RB87_HYPERFINE_HZ, RB87_MASS,
};
use crate::error::CoreError;

/// 3-vector helpers. Coordinates: x = launch axis, z = Raman beam axis
/// (pointing from the atoms towards the retro-reflecting mirror), y completes
/// the right-handed triad.
pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Atomic species entering the interferometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    /// Atomic mass, kg.
    pub mass: f64,
    /// Effective two-photon wavelength basis, m (k_eff = 4 pi / lambda).
    pub lambda_raman: f64,
    /// Lande factor of the launched hyperfine state.
    pub g_f: f64,
    /// Ground-state hyperfine splitting, Hz.
    pub hyperfine_splitting: f64,
}

impl Species {
    pub fn rb87() -> Self {
        Species {
            mass: RB87_MASS,
            lambda_raman: RB87_D2_WAVELENGTH,
            g_f: RB87_G_F,
            hyperfine_splitting: RB87_HYPERFINE_HZ,
        }
    }

    /// Effective wave vector magnitude of the counter-propagating Raman
    /// pair, rad/m.
    pub fn k_eff(&self) -> f64 {
        4.0 * std::f64::consts::PI / self.lambda_raman
    }

    /// Two-photon recoil frequency omega_r = hbar k_eff^2 / (2 m), rad/s.
    pub fn recoil_frequency(&self) -> f64 {
        HBAR * self.k_eff().powi(2) / (2.0 * self.mass)
    }

    /// 1-D thermal velocity dispersion sigma_v = sqrt(k_B T / m), m/s.
    pub fn thermal_sigma_v(&self, temperature: f64) -> f64 {
        (K_B * temperature / self.mass).sqrt()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.mass <= 0.0 {
            return Err(CoreError::InvalidParameter("species mass must be > 0".into()));
        }
        if self.lambda_raman <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "lambda_raman must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Magnetic field gradient pulse used to launch the atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchPulse {
    /// |grad B| along the launch axis, T/m.
    pub gradient: f64,
    /// Pulse duration, s.
    pub duration: f64,
    /// Zeeman index of the launched state.
    pub m_f: i8,
    /// Launch direction sign (+1 or -1).
    pub sign: i8,
}

impl LaunchPulse {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.duration <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "launch pulse duration must be > 0".into(),
            ));
        }
        if self.m_f.abs() > 2 {
            return Err(CoreError::InvalidParameter("|m_F| must be <= 2".into()));
        }
        if self.sign != 1 && self.sign != -1 {
            return Err(CoreError::InvalidParameter("sign must be +/-1".into()));
        }
        Ok(())
    }
}

/// Launch velocity in the impulse approximation: the magnetic force
/// mu_B m_F g_F |grad B| acts for `duration` on an atom of mass m, and only
/// the final velocity matters for the interferometer.
pub fn launch_velocity(species: &Species, pulse: &LaunchPulse) -> f64 {
    f64::from(pulse.sign) * MU_B * f64::from(pulse.m_f) * species.g_f * pulse.gradient
        / species.mass
        * pulse.duration
}

/// Free-flight state of one atom (or the cloud mid-point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallisticState {
    /// Position, m.
    pub position: Vec3,
    /// Velocity, m/s.
    pub velocity: Vec3,
    /// Time, s.
    pub time: f64,
}

/// Closed-form free fall: r' = r + v dt + g dt^2/2, v' = v + g dt.
pub fn propagate(state: &BallisticState, dt: f64, gravity: Vec3) -> BallisticState {
    debug_assert!(dt >= 0.0);
    BallisticState {
        position: add(
            state.position,
            add(scale(state.velocity, dt), scale(gravity, 0.5 * dt * dt)),
        ),
        velocity: add(state.velocity, scale(gravity, dt)),
        time: state.time + dt,
    }
}
