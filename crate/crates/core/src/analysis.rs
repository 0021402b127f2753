//! Allan deviation estimation, sinusoidal fringe fitting and the
//! systematic-error budget.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::CoreError;

/// Allan deviation curve with 1-sigma confidence intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct AdevCurve {
    /// Averaging times, s, strictly increasing.
    pub taus: Vec<f64>,
    /// Overlapping Allan deviation at each tau.
    pub sigmas: Vec<f64>,
    /// Lower/upper 1-sigma bounds.
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl AdevCurve {
    /// First tau at which `self` drops below `other` (both interpolated on
    /// the shared tau grid of `self`). Ties break to the earliest tau.
    pub fn first_crossing_below(&self, other: &AdevCurve) -> Option<f64> {
        for (i, &tau) in self.taus.iter().enumerate() {
            let o = other.interpolate(tau)?;
            if self.sigmas[i] <= o {
                return Some(tau);
            }
        }
        None
    }

    /// Log-log interpolation of sigma at `tau`; None outside the range.
    pub fn interpolate(&self, tau: f64) -> Option<f64> {
        let n = self.taus.len();
        if n == 0 || tau < self.taus[0] || tau > self.taus[n - 1] {
            return None;
        }
        let j = match self
            .taus
            .binary_search_by(|t| t.partial_cmp(&tau).unwrap())
        {
            Ok(j) => return Some(self.sigmas[j]),
            Err(j) => j,
        };
        let (t0, t1) = (self.taus[j - 1], self.taus[j]);
        let (s0, s1) = (self.sigmas[j - 1], self.sigmas[j]);
        if s0 <= 0.0 || s1 <= 0.0 {
            let f = (tau - t0) / (t1 - t0);
            return Some(s0 + f * (s1 - s0));
        }
        let f = (tau.ln() - t0.ln()) / (t1.ln() - t0.ln());
        Some((s0.ln() + f * (s1.ln() - s0.ln())).exp())
    }
}

/// Equivalent degrees of freedom for the overlapping Allan variance
/// (white-FM approximation, IEEE 1139 style).
fn adev_edf(n: usize, m: usize) -> f64 {
    let n = n as f64;
    let m = m as f64;
    let base = 3.0 * (n - 1.0) / (2.0 * m) - 2.0 * (n - 2.0) / n;
    (base * 4.0 * m * m / (4.0 * m * m + 5.0)).max(1.0)
}

/// Overlapping Allan deviation of a uniformly sampled series at the
/// requested averaging times. Each tau is rounded down to an integer
/// multiple of `dt`.
pub fn allan_deviation(
    series: &[f64],
    dt: f64,
    taus: &[f64],
) -> Result<AdevCurve, CoreError> {
    let n = series.len();
    let max_tau = taus.iter().cloned().fold(0.0, f64::max);
    if (n as f64) * dt < 3.0 * max_tau {
        return Err(CoreError::SeriesTooShort(n, max_tau, dt));
    }
    let mut out = AdevCurve {
        taus: Vec::with_capacity(taus.len()),
        sigmas: Vec::with_capacity(taus.len()),
        ci_low: Vec::with_capacity(taus.len()),
        ci_high: Vec::with_capacity(taus.len()),
    };
    // Prefix sums so each m-sample average is O(1).
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &y in series {
        prefix.push(prefix.last().unwrap() + y);
    }
    for &tau in taus {
        let m = ((tau / dt).round() as usize).max(1);
        if n < 2 * m + 1 {
            return Err(CoreError::SeriesTooShort(n, tau, dt));
        }
        let terms = n - 2 * m + 1;
        let mut acc = 0.0;
        for j in 0..terms {
            let a0 = prefix[j + m] - prefix[j];
            let a1 = prefix[j + 2 * m] - prefix[j + m];
            let d = (a1 - a0) / m as f64;
            acc += d * d;
        }
        let var = acc / (2.0 * terms as f64);
        let sigma = var.sqrt();
        let edf = adev_edf(n, m);
        let chi = ChiSquared::new(edf).expect("edf > 0");
        // 1-sigma two-sided interval on sigma via chi-square on the variance.
        let hi = (var * edf / chi.inverse_cdf(0.158_655)).sqrt();
        let lo = (var * edf / chi.inverse_cdf(0.841_345)).sqrt();
        out.taus.push(m as f64 * dt);
        out.sigmas.push(sigma);
        out.ci_low.push(lo);
        out.ci_high.push(hi);
    }
    Ok(out)
}

/// Result of a sinusoidal fringe fit P2(alpha) = P_m - (C/2) cos(alpha T^2 + phi).
#[derive(Debug, Clone, PartialEq)]
pub struct FringeFit {
    pub mean: f64,
    pub contrast: f64,
    /// Phase offset in (-pi, pi] (branch nearest zero).
    pub phase_offset: f64,
    /// Chirp rate at the fringe center nearest the scan center, rad/s^2.
    pub alpha_star: f64,
    pub residuals: Vec<f64>,
    /// Covariance of (mean, contrast, phase_offset).
    pub covariance: [[f64; 3]; 3],
}

pub const FRINGE_CONTRAST_THRESHOLD: f64 = 0.02;

fn solve3(mut a: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b, c, d) = (
                m[(i + 1) % 3][(j + 1) % 3],
                m[(i + 1) % 3][(j + 2) % 3],
                m[(i + 2) % 3][(j + 1) % 3],
                m[(i + 2) % 3][(j + 2) % 3],
            );
            out[j][i] = (a * d - b * c) * inv_det;
        }
    }
    Some(out)
}

/// Least-squares fit of P_m - (C/2) cos(alpha T^2 + phi) to a fringe scan.
///
/// The fringe period is fixed by `t_sep`, so the model is linear in
/// (P_m, cos-, sin-quadrature) and the fit is a direct normal-equation
/// solve with no iteration.
pub fn fit_fringe(
    alphas: &[f64],
    p2s: &[f64],
    t_sep: f64,
) -> Result<FringeFit, CoreError> {
    if alphas.len() != p2s.len() || alphas.len() < 4 {
        return Err(CoreError::FitFailed(format!(
            "need >= 4 matched samples, got {} / {}",
            alphas.len(),
            p2s.len()
        )));
    }
    let t2 = t_sep * t_sep;
    // Model: y = m + a cos x + b sin x, with x = alpha T^2.
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    for (&alpha, &y) in alphas.iter().zip(p2s) {
        let x = alpha * t2;
        let row = [1.0, x.cos(), x.sin()];
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * y;
        }
    }
    let aug = [
        [xtx[0][0], xtx[0][1], xtx[0][2], xty[0]],
        [xtx[1][0], xtx[1][1], xtx[1][2], xty[1]],
        [xtx[2][0], xtx[2][1], xtx[2][2], xty[2]],
    ];
    let [mean, a, b] =
        solve3(aug).ok_or_else(|| CoreError::FitFailed("degenerate design matrix".into()))?;
    let contrast = 2.0 * a.hypot(b);
    if contrast < FRINGE_CONTRAST_THRESHOLD {
        return Err(CoreError::FitFailed(format!(
            "contrast {contrast:.4} below threshold {FRINGE_CONTRAST_THRESHOLD}"
        )));
    }
    // a = -(C/2) cos phi, b = (C/2) sin phi.
    let phase_offset = b.atan2(-a);
    let residuals: Vec<f64> = alphas
        .iter()
        .zip(p2s)
        .map(|(&alpha, &y)| {
            let x = alpha * t2;
            y - (mean + a * x.cos() + b * x.sin())
        })
        .collect();
    let dof = (alphas.len() as f64 - 3.0).max(1.0);
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    let cov_lin = invert3(xtx)
        .ok_or_else(|| CoreError::FitFailed("singular normal matrix".into()))?;
    // Propagate (m, a, b) covariance to (mean, C, phi) with the Jacobian.
    let half_c = 0.5 * contrast;
    let jac = [
        [1.0, 0.0, 0.0],
        [0.0, 2.0 * a / half_c, 2.0 * b / half_c],
        [0.0, b / (half_c * half_c), -a / (half_c * half_c)],
    ];
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    acc += jac[i][p] * cov_lin[p][q] * jac[j][q];
                }
            }
            covariance[i][j] = acc * s2;
        }
    }
    // Fringe center: dPhi = x + phi = 0 mod 2pi, branch nearest the scan
    // center.
    let x_mid = 0.5 * (alphas.iter().cloned().fold(f64::INFINITY, f64::min)
        + alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        * t2;
    let two_pi = std::f64::consts::TAU;
    let k = ((x_mid + phase_offset) / two_pi).round();
    let alpha_star = (k * two_pi - phase_offset) / t2;
    Ok(FringeFit {
        mean,
        contrast,
        phase_offset,
        alpha_star,
        residuals,
        covariance,
    })
}

/// Polynomial wavefront deformation of the Raman beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavefrontSpec {
    /// Polynomial order k >= 2.
    pub order: u32,
    /// Deformation amplitude A_k, rad/m^k.
    pub amplitude: f64,
    /// 1/e^2 beam waist, m.
    pub waist: f64,
    /// Wavefront error in length units (peak to valley over 2w).
    pub optical_quality: f64,
    /// Optical wavelength, m.
    pub wavelength: f64,
}

impl WavefrontSpec {
    /// A_k = (2 pi / lambda * 2 OQ) / w^k from an optical-quality figure.
    pub fn from_optical_quality(
        order: u32,
        optical_quality: f64,
        waist: f64,
        wavelength: f64,
    ) -> Self {
        let amplitude = (std::f64::consts::TAU / wavelength * 2.0 * optical_quality)
            / waist.powi(order as i32);
        WavefrontSpec {
            order,
            amplitude,
            waist,
            optical_quality,
            wavelength,
        }
    }
}

/// Rotation-rate bias from an order-k wavefront deformation with launch
/// dissymmetry dx. Even orders cancel by symmetry; k = 3 uses the closed
/// form 3 A_3 v dx / k_eff; other odd orders fall back to the polynomial
/// three-point path.
pub fn wavefront_rotation_bias(
    spec: &WavefrontSpec,
    v_l: f64,
    dx: f64,
    k_eff: f64,
    t_sep: f64,
) -> f64 {
    if spec.order % 2 == 0 {
        return 0.0;
    }
    if spec.order == 3 {
        return 3.0 * spec.amplitude * v_l * dx / k_eff;
    }
    wavefront_rotation_bias_polynomial(spec, v_l, dx, k_eff, t_sep)
}

/// Independent route: evaluate the pulse-position polynomial combination
/// phi_1 - 2 phi_2 + phi_3 at x_i = +/-(dx + v t_i), t_i in {-T, 0, T},
/// and divide the +/-v difference by 4 v k_eff T^2. Valid for any order,
/// reproducing the even-order cancellation as an identity.
pub fn wavefront_rotation_bias_polynomial(
    spec: &WavefrontSpec,
    v_l: f64,
    dx: f64,
    k_eff: f64,
    t_sep: f64,
) -> f64 {
    let k = spec.order as i32;
    let comb = |positions: [f64; 3]| -> f64 {
        spec.amplitude
            * (positions[0].powi(k) - 2.0 * positions[1].powi(k) + positions[2].powi(k))
    };
    let xs_plus = [dx - v_l * t_sep, dx, dx + v_l * t_sep];
    let xs_minus = [-xs_plus[0], -xs_plus[1], -xs_plus[2]];
    (comb(xs_plus) - comb(xs_minus)) / (4.0 * v_l * k_eff * t_sep * t_sep)
}

/// Inputs to the systematic-error budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystematicsScene {
    pub wavefront: WavefrontSpec,
    /// Launch dissymmetry dx, m.
    pub dissymmetry: f64,
    /// Launch velocity magnitude, m/s.
    pub v_l: f64,
    pub k_eff: f64,
    pub t_sep: f64,
    /// Horizontal offset of the cloud from the mirror rotation axis at the
    /// pi pulse, m.
    pub d0: f64,
    /// Drive phase at the pi pulse, rad.
    pub phi0: f64,
    /// Dynamic drive amplitude, rad/s.
    pub omega_d: f64,
    /// Angular frequency of the sinusoidal drive, rad/s.
    pub drive_angular_freq: f64,
    /// Static rotation rate (Earth projection), rad/s.
    pub omega_static: f64,
    /// Vertical misalignment of the Raman beam, rad.
    pub tilt: f64,
    /// Local gravity, m/s^2.
    pub gravity: f64,
}

/// One row of the budget table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetTerm {
    pub term: &'static str,
    pub axis: &'static str,
    pub value: f64,
    pub units: &'static str,
}

/// Evaluate the named bias terms for a scene. All entries are zero for the
/// all-ideal geometry (dx = d0 = tilt = 0).
pub fn systematic_budget(scene: &SystematicsScene) -> Vec<BudgetTerm> {
    let wavefront = wavefront_rotation_bias(
        &scene.wavefront,
        scene.v_l,
        scene.dissymmetry,
        scene.k_eff,
        scene.t_sep,
    );
    // Euler term: Omega_dot x r sampled at the pi pulse for the sinusoidal
    // drive Omega(t) = Omega_d cos(w_drive (t - t_pi) + phi0).
    let omega_dot = scene.omega_d * scene.drive_angular_freq * scene.phi0.sin();
    let euler = omega_dot * scene.d0 / (2.0 * scene.v_l);
    let euler_fraction = if scene.omega_d > 0.0 {
        euler / (scene.omega_d * scene.phi0.cos())
    } else {
        0.0
    };
    let centrifugal = scene.omega_static.powi(2) * scene.d0;
    let gravity_misalignment = scene.gravity * (1.0 - scene.tilt.cos());
    vec![
        BudgetTerm {
            term: "wavefront_aberration",
            axis: "rotation",
            value: wavefront,
            units: "rad/s",
        },
        BudgetTerm {
            term: "euler_bias",
            axis: "rotation",
            value: euler,
            units: "rad/s",
        },
        BudgetTerm {
            term: "euler_fraction_of_coriolis",
            axis: "rotation",
            value: euler_fraction,
            units: "dimensionless",
        },
        BudgetTerm {
            term: "centrifugal",
            axis: "acceleration",
            value: centrifugal,
            units: "m/s^2",
        },
        BudgetTerm {
            term: "gravity_misalignment",
            axis: "acceleration",
            value: gravity_misalignment,
            units: "m/s^2",
        },
    ]
}
