//! Retro-reflected Raman spectroscopy: spectrum synthesis, two-photon
//! light-shift correction and launch-velocity extraction.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::physics::Species;

/// Pole guard for the light-shift formula, rad/s.
pub const DEFAULT_DEGENERACY_EPS: f64 = 1.0e3;

/// Which transition a spectral line belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RamanBranch {
    CoProp,
    CounterPropPlus,
    CounterPropMinus,
}

/// One resonance line of the Raman spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanLine {
    /// Line center as two-photon detuning offset, Hz.
    pub center: f64,
    /// Characteristic width (Rabi frequency over 2 pi), Hz.
    pub width: f64,
    /// Peak transition probability.
    pub amplitude: f64,
    pub branch: RamanBranch,
}

/// Inputs of the two-photon light-shift formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TplsParams {
    /// Effective Rabi frequency, rad/s.
    pub rabi: f64,
    /// Doppler shift k_eff * v, rad/s.
    pub doppler: f64,
    /// Two-photon recoil frequency, rad/s.
    pub recoil: f64,
}

/// Per-line two-photon light shift of a counter-propagating resonance:
///
/// delta_omega = -rabi^2 [1/(4 w_D) + 1/(8 w_D + 16 w_r) + 1/(8 w_D - 16 w_r)]
///
/// Odd in the Doppler shift, so it widens (or narrows) the splitting between
/// the two counter-propagating lines by twice this value. Subtract
/// 2 * tpls_shift / 2 pi from a measured splitting to correct it.
pub fn tpls_shift(p: &TplsParams) -> Result<f64, CoreError> {
    tpls_shift_eps(p, DEFAULT_DEGENERACY_EPS)
}

pub fn tpls_shift_eps(p: &TplsParams, eps: f64) -> Result<f64, CoreError> {
    if p.recoil <= 0.0 {
        return Err(CoreError::InvalidParameter("recoil must be > 0".into()));
    }
    let d1 = 4.0 * p.doppler;
    let d2 = 8.0 * p.doppler + 16.0 * p.recoil;
    let d3 = 8.0 * p.doppler - 16.0 * p.recoil;
    let worst = d1.abs().min(d2.abs()).min(d3.abs());
    if worst < eps {
        return Err(CoreError::DegenerateDoppler(worst, eps));
    }
    Ok(-p.rabi * p.rabi * (1.0 / d1 + 1.0 / d2 + 1.0 / d3))
}

/// Raman spectrum samples on a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Two-photon detuning offsets, Hz.
    pub freq_hz: Vec<f64>,
    /// Transition probability at each grid point.
    pub p2: Vec<f64>,
    /// 1-sigma additive noise per point.
    pub p2_err: f64,
}

impl Spectrum {
    /// Spectrum CSV: (freq_offset_hz, p2, p2_err).
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "freq_offset_hz,p2,p2_err")?;
        for (f, p) in self.freq_hz.iter().zip(&self.p2) {
            writeln!(w, "{:.3},{:.9e},{:.3e}", f, p, self.p2_err)?;
        }
        Ok(())
    }
}

/// Rabi transition probability at detuning `delta` (rad/s) for a square
/// pulse of the given duration.
fn rabi_line(delta: f64, rabi: f64, duration: f64) -> f64 {
    let w2 = rabi * rabi + delta * delta;
    if w2 == 0.0 {
        return 0.0;
    }
    rabi * rabi / w2 * (0.5 * w2.sqrt() * duration).sin().powi(2)
}

/// Relative height of the co-propagating center line.
pub const CO_PROP_AMPLITUDE: f64 = 1.0;
/// Relative height of each counter-propagating side line.
pub const COUNTER_PROP_AMPLITUDE: f64 = 0.7;

/// Line table for a launch velocity `v`: a degenerate co-propagating peak at
/// zero offset and two counter-propagating peaks at (+/-w_D + w_r)/2pi, each
/// pulled by its light shift.
pub fn raman_lines(species: &Species, v: f64, rabi: f64) -> Vec<RamanLine> {
    let w_d = species.k_eff() * v;
    let w_r = species.recoil_frequency();
    let tau = std::f64::consts::TAU;
    let width = rabi / tau;
    let shift = |doppler: f64| {
        tpls_shift(&TplsParams {
            rabi,
            doppler,
            recoil: w_r,
        })
        .unwrap_or(0.0)
    };
    vec![
        RamanLine {
            center: 0.0,
            width,
            amplitude: CO_PROP_AMPLITUDE,
            branch: RamanBranch::CoProp,
        },
        RamanLine {
            center: (w_d + w_r + shift(w_d)) / tau,
            width,
            amplitude: COUNTER_PROP_AMPLITUDE,
            branch: RamanBranch::CounterPropPlus,
        },
        RamanLine {
            center: (-w_d + w_r + shift(-w_d)) / tau,
            width,
            amplitude: COUNTER_PROP_AMPLITUDE,
            branch: RamanBranch::CounterPropMinus,
        },
    ]
}

/// Synthesize a noisy Raman spectrum on `grid_hz` for launch velocity `v`.
pub fn simulate_spectrum(
    species: &Species,
    v: f64,
    pulse_duration: f64,
    rabi: f64,
    grid_hz: &[f64],
    noise_rms: f64,
    rng: &mut impl Rng,
) -> Result<Spectrum, CoreError> {
    if grid_hz.len() < 5 {
        return Err(CoreError::InvalidParameter(
            "spectrum grid needs at least 5 points".into(),
        ));
    }
    let tau = std::f64::consts::TAU;
    let need = (species.k_eff() * v.abs() + species.recoil_frequency()) / tau
        + 1.0 / pulse_duration;
    let lo = grid_hz.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid_hz.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > -need || hi < need {
        return Err(CoreError::GridTooNarrow { lo, hi, need });
    }
    let lines = raman_lines(species, v, rabi);
    let p2 = grid_hz
        .iter()
        .map(|&f| {
            let clean: f64 = lines
                .iter()
                .map(|l| l.amplitude * rabi_line(tau * (f - l.center), rabi, pulse_duration))
                .sum();
            clean + noise_rms * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok(Spectrum {
        freq_hz: grid_hz.to_vec(),
        p2,
        p2_err: noise_rms,
    })
}

/// Launch velocity from a counter-propagating splitting: v = pi dnu / k.
pub fn velocity_from_splitting(delta_nu_hz: f64, k_eff: f64) -> f64 {
    std::f64::consts::PI * delta_nu_hz / k_eff
}

/// Result of a velocity fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityFit {
    /// Extracted launch velocity, m/s.
    pub velocity: f64,
    /// Propagated 1-sigma statistical error, m/s.
    pub stat_err: f64,
    /// Fitted side-peak centers, Hz (low, high).
    pub peaks_hz: (f64, f64),
    /// Light-shift correction applied to the splitting, Hz (0 when disabled).
    pub tpls_correction_hz: f64,
}

/// Matched-filter refinement of one peak center against the known Rabi line
/// shape (a pi pulse is assumed, duration = pi / rabi). The modeled
/// contribution of `others` (center, amplitude pairs) is subtracted from the
/// data first, which removes the vertex pull of overlapping line tails.
/// Returns (center_hz, amplitude).
fn matched_peak(
    freq: &[f64],
    p2: &[f64],
    guess: f64,
    rabi: f64,
    duration: f64,
    others: &[(f64, f64)],
) -> Result<(f64, f64), CoreError> {
    let tau = std::f64::consts::TAU;
    let width = rabi / tau;
    let idx: Vec<usize> = (0..freq.len())
        .filter(|&i| (freq[i] - guess).abs() <= 0.8 * width)
        .collect();
    if idx.len() < 5 {
        return Err(CoreError::PeakNotFound);
    }
    let resid: Vec<f64> = idx
        .iter()
        .map(|&i| {
            p2[i]
                - others
                    .iter()
                    .map(|&(c, a)| a * rabi_line(tau * (freq[i] - c), rabi, duration))
                    .sum::<f64>()
        })
        .collect();
    // Correlation score; the best-fit amplitude at center c comes for free.
    let score_amp = |c: f64| -> (f64, f64) {
        let (mut sy, mut sg) = (0.0, 0.0);
        for (k, &i) in idx.iter().enumerate() {
            let g = rabi_line(tau * (freq[i] - c), rabi, duration);
            sy += resid[k] * g;
            sg += g * g;
        }
        if sg <= 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (sy * sy / sg, sy / sg)
        }
    };
    // Golden-section maximization within half a linewidth of the guess.
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (guess - 0.5 * width, guess + 0.5 * width);
    let mut c1 = hi - gr * (hi - lo);
    let mut c2 = lo + gr * (hi - lo);
    let mut f1 = score_amp(c1).0;
    let mut f2 = score_amp(c2).0;
    for _ in 0..90 {
        if f1 < f2 {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + gr * (hi - lo);
            f2 = score_amp(c2).0;
        } else {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - gr * (hi - lo);
            f1 = score_amp(c1).0;
        }
    }
    let c = 0.5 * (lo + hi);
    let (_, amp) = score_amp(c);
    if amp <= 0.0 {
        return Err(CoreError::PeakNotFound);
    }
    Ok((c, amp))
}

/// 1-sigma statistical error of a matched-filter center estimate (Fisher
/// information of the single-line model with known shape).
fn matched_err(
    freq: &[f64],
    guess: f64,
    center: f64,
    amp: f64,
    rabi: f64,
    duration: f64,
    sigma_y: f64,
) -> f64 {
    if sigma_y == 0.0 {
        return 0.0;
    }
    let tau = std::f64::consts::TAU;
    let width = rabi / tau;
    let df = 1e-4 * width;
    let mut s = 0.0;
    for i in 0..freq.len() {
        if (freq[i] - guess).abs() > 0.8 * width {
            continue;
        }
        let gp = (rabi_line(tau * (freq[i] - center - df), rabi, duration)
            - rabi_line(tau * (freq[i] - center + df), rabi, duration))
            / (2.0 * df);
        s += (amp * gp).powi(2);
    }
    if s > 0.0 {
        sigma_y / s.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Locate the two counter-propagating peaks, compute the splitting, optionally
/// remove the two-photon light shift, and return the velocity.
///
/// The Doppler entry of `tpls` is used only as a fallback; when correcting,
/// the shift is re-evaluated self-consistently at the measured splitting.
pub fn fit_velocity(
    spectrum: &Spectrum,
    k_eff: f64,
    correct_tpls: bool,
    tpls: &TplsParams,
) -> Result<VelocityFit, CoreError> {
    let freq = &spectrum.freq_hz;
    let p2 = &spectrum.p2;
    let tau = std::f64::consts::TAU;
    // Central exclusion window: a few linewidths around the co-propagating
    // peak, capped below the expected side-peak position so broad lines
    // (short pulses) do not swallow the peaks being fitted.
    let exclusion =
        (2.5 * tpls.rabi / tau).min(0.6 * (tpls.doppler.abs() + tpls.recoil) / tau);
    let min_sep = (2.0 * tpls.rabi / tau).min(exclusion);
    // Local maxima outside the exclusion window.
    let mut maxima: Vec<usize> = (1..p2.len() - 1)
        .filter(|&i| {
            freq[i].abs() > exclusion && p2[i] > p2[i - 1] && p2[i] >= p2[i + 1]
        })
        .collect();
    maxima.sort_by(|&a, &b| p2[b].partial_cmp(&p2[a]).unwrap());
    // Cluster maxima closer than a linewidth (noise ripples on one peak).
    let mut candidates: Vec<usize> = Vec::new();
    for &i in &maxima {
        if candidates
            .iter()
            .all(|&j| (freq[i] - freq[j]).abs() > min_sep)
        {
            candidates.push(i);
        }
    }
    let noise_floor = 5.0 * spectrum.p2_err;
    candidates.retain(|&i| p2[i] > noise_floor);
    if candidates.len() >= 2 {
        let top = p2[candidates[0]];
        let strong = candidates.iter().filter(|&&i| p2[i] > 0.5 * top).count();
        if strong > 2 {
            return Err(CoreError::AmbiguousPeaks(strong));
        }
    }
    // Initial guess per side: the strongest candidate near the expected line
    // position. Short pulses overlap so strongly that one side peak can lose
    // its local maximum entirely; the expected position itself then seeds the
    // matched filter (this is the only use of the Doppler prior).
    let width = tpls.rabi / tau;
    let prior = |sign: f64| {
        let d = sign * tpls.doppler.abs();
        let shift = tpls_shift(&TplsParams { doppler: d, ..*tpls }).unwrap_or(0.0);
        (d + tpls.recoil + shift) / tau
    };
    let guesses = [1.0, -1.0].map(|sign| {
        let p = prior(sign);
        candidates
            .iter()
            .find(|&&i| (freq[i] - p).abs() <= 1.5 * width)
            .map_or(p, |&i| freq[i])
    });
    // Matched-filter refinement of both side peaks, iterating so each one is
    // fitted on data with the other lines' modeled contribution removed.
    let duration = std::f64::consts::PI / tpls.rabi;
    let mut side = [(guesses[0], 0.7), (guesses[1], 0.7)];
    // Co-propagating line estimate from the excluded central region.
    let co = (0..p2.len())
        .filter(|&i| freq[i].abs() <= exclusion)
        .max_by(|&a, &b| p2[a].partial_cmp(&p2[b]).unwrap())
        .map_or((0.0, 0.0), |i| (freq[i], p2[i]));
    for _ in 0..3 {
        for j in 0..2 {
            let others = [side[1 - j], co];
            side[j] = matched_peak(freq, p2, guesses[j], tpls.rabi, duration, &others)?;
        }
    }
    if side.iter().any(|&(_, a)| a <= noise_floor) {
        return Err(CoreError::PeakNotFound);
    }
    let errs = [0, 1].map(|j| {
        matched_err(
            freq,
            guesses[j],
            side[j].0,
            side[j].1,
            tpls.rabi,
            duration,
            spectrum.p2_err,
        )
    });
    let (pa, pb) = (side[0].0, side[1].0);
    let (f_lo, f_hi) = if pa < pb { (pa, pb) } else { (pb, pa) };
    let delta_nu_meas = f_hi - f_lo;
    let sigma_nu = (errs[0] * errs[0] + errs[1] * errs[1]).sqrt();

    let mut correction = 0.0;
    if correct_tpls {
        // Fixed-point iteration: the measured splitting itself carries the
        // shift, so refine the Doppler estimate a few times.
        let mut delta_nu = delta_nu_meas;
        for _ in 0..6 {
            let doppler = std::f64::consts::PI * delta_nu;
            let shift = tpls_shift(&TplsParams { doppler, ..*tpls })
                .or_else(|_| tpls_shift(tpls))?;
            correction = 2.0 * shift / tau;
            delta_nu = delta_nu_meas - correction;
        }
    }
    let delta_nu = delta_nu_meas - correction;
    Ok(VelocityFit {
        velocity: velocity_from_splitting(delta_nu, k_eff),
        stat_err: std::f64::consts::PI * sigma_nu / k_eff,
        peaks_hz: (f_lo, f_hi),
        tpls_correction_hz: correction,
    })
}

/// Slow launch-velocity wander: per-measurement white noise plus a
/// first-order Gauss-Markov process. Default coefficients are fitted so the
/// velocity Allan deviation reaches ~60 um/s at 24 h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityDriftModel {
    /// Per-measurement white sigma, m/s.
    pub white_sigma: f64,
    /// Gauss-Markov steady-state sigma, m/s.
    pub gm_sigma: f64,
    /// Gauss-Markov correlation time, s.
    pub gm_tau: f64,
}

impl VelocityDriftModel {
    pub fn lab_calibrated() -> Self {
        VelocityDriftModel {
            white_sigma: 4.0e-4,
            gm_sigma: 1.46e-4,
            gm_tau: 86_400.0,
        }
    }
}

/// Velocity offsets at `n` uniformly spaced measurement times (spacing `dt`).
/// Uses the exact Gauss-Markov discretization, so the result is stationary.
pub fn sample_velocity_drift(
    model: &VelocityDriftModel,
    n: usize,
    dt: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let phi = (-dt / model.gm_tau).exp();
    let gm_step = model.gm_sigma * (1.0 - phi * phi).sqrt();
    let mut gm = model.gm_sigma * rng.sample::<f64, _>(StandardNormal);
    (0..n)
        .map(|_| {
            let out = gm + model.white_sigma * rng.sample::<f64, _>(StandardNormal);
            gm = phi * gm + gm_step * rng.sample::<f64, _>(StandardNormal);
            out
        })
        .collect()
}

/// Velocity log CSV: (t_s, v_m_per_s, stat_err).
pub fn write_velocity_log(
    w: &mut impl Write,
    times: &[f64],
    fits: &[VelocityFit],
) -> std::io::Result<()> {
    writeln!(w, "t_s,v_m_per_s,stat_err")?;
    for (t, f) in times.iter().zip(fits) {
        writeln!(w, "{:.3},{:.9e},{:.3e}", t, f.velocity, f.stat_err)?;
    }
    Ok(())
}
