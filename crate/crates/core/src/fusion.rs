//! Fixed-gain hybridization of a classical sensor with sparse atomic
//! measurements.
//!
//! The tracker estimates the classical sensor's bias from the atomic
//! reference,
//!
//!   b_n = b_{n-1} + G [ (atomic_n - classical_n) - b_{n-1} ],
//!
//! and the hybrid output is classical + b at the full classical rate. The
//! arithmetic is identical in streaming and post-processing use.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::AdevCurve;

/// Bias-tracking loop state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    /// Current estimate of (atomic - classical), i.e. minus the classical
    /// bias, in the sensor's unit.
    pub bias_estimate: f64,
    /// Loop gain in (0, 1].
    pub gain: f64,
    /// Time of the last atomic update, s.
    pub last_update: f64,
}

impl HybridState {
    pub fn new(gain: f64) -> Self {
        assert!(gain > 0.0 && gain <= 1.0, "gain must be in (0, 1]");
        HybridState {
            bias_estimate: 0.0,
            gain,
            last_update: f64::NEG_INFINITY,
        }
    }
}

/// One bias update from an atomic measurement and the classical output
/// averaged over the same interval.
pub fn hybrid_update(state: &HybridState, atomic: f64, classical_avg: f64, t: f64) -> HybridState {
    let error = (atomic - classical_avg) - state.bias_estimate;
    HybridState {
        bias_estimate: state.bias_estimate + state.gain * error,
        gain: state.gain,
        last_update: t,
    }
}

/// Hybrid sample at the classical rate.
pub fn hybrid_output(state: &HybridState, classical_sample: f64) -> f64 {
    classical_sample + state.bias_estimate
}

/// Gain choice from the Allan-deviation crossing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainChoice {
    pub gain: f64,
    /// Crossing time of the two curves, s; `None` when the fallback was used.
    pub tau_cross: Option<f64>,
}

/// First-order loop time constant matched to the tau where the classical
/// Allan deviation rises above the atomic one: G = update_period / tau_cross,
/// clamped to (0, 1]. Ties pick the earliest tau; without a crossing the
/// configured fallback gain is returned and flagged.
pub fn pick_gain(
    atomic: &AdevCurve,
    classical: &AdevCurve,
    update_period: f64,
    fallback: f64,
) -> GainChoice {
    let mut prev: Option<(f64, f64)> = None; // (tau, classical - atomic)
    for (&tau, &sig_at) in atomic.taus.iter().zip(&atomic.sigmas) {
        let Some(sig_cl) = classical.interpolate(tau) else {
            prev = None;
            continue;
        };
        let diff = sig_cl - sig_at;
        if diff >= 0.0 {
            let tau_cross = match prev {
                // Log-linear root of the sign change.
                Some((tau0, d0)) if diff > 0.0 && d0 < 0.0 => {
                    let f = -d0 / (diff - d0);
                    (tau0.ln() + f * (tau.ln() - tau0.ln())).exp()
                }
                _ => tau,
            };
            return GainChoice {
                gain: (update_period / tau_cross).clamp(f64::MIN_POSITIVE, 1.0),
                tau_cross: Some(tau_cross),
            };
        }
        prev = Some((tau, diff));
    }
    GainChoice {
        gain: fallback,
        tau_cross: None,
    }
}

/// Hybrid output CSV: (t_s, hybrid_value, classical_value, bias_estimate,
/// atomic_value_if_present). Rows without an atomic sample leave the last
/// column empty.
pub fn write_hybrid_csv(
    w: &mut impl Write,
    rows: &[(f64, f64, f64, f64, Option<f64>)],
) -> std::io::Result<()> {
    writeln!(
        w,
        "t_s,hybrid_value,classical_value,bias_estimate,atomic_value_if_present"
    )?;
    for (t, hybrid, classical, bias, atomic) in rows {
        match atomic {
            Some(a) => writeln!(
                w,
                "{:.3},{:.9e},{:.9e},{:.9e},{:.9e}",
                t, hybrid, classical, bias, a
            )?,
            None => writeln!(
                w,
                "{:.3},{:.9e},{:.9e},{:.9e},",
                t, hybrid, classical, bias
            )?,
        }
    }
    Ok(())
}
