//! Physical constants (CODATA 2018) and species data.
//!
//! All other modules import constants from here; nothing else hard-codes a
//! physical constant.

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Rb-87 atomic mass, kg.
pub const RB87_MASS: f64 = 1.443_160_6e-25;

/// Rb-87 D2 line wavelength, m. Fixes the effective two-photon wave
/// vector k_eff = 4 pi / lambda for the counter-propagating Raman pair.
pub const RB87_D2_WAVELENGTH: f64 = 780.241e-9;

/// Lande factor of the Rb-87 F = 2 ground state.
pub const RB87_G_F: f64 = 0.5;

/// Rb-87 ground-state hyperfine splitting, Hz.
pub const RB87_HYPERFINE_HZ: f64 = 6.834_682_610_904e9;

/// Standard gravity, m/s^2. Used only as a convenient default for configs.
pub const G_STD: f64 = 9.806_65;
