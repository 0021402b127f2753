//! Vibration environments, classical sensor models and the
//! sensitivity-function vibration correction.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Magic header of the binary trace format.
pub const TRACE_MAGIC: &[u8; 8] = b"ATMSNS01";

/// Uniformly sampled classical-sensor or ground-truth trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    /// Sample rate, Hz.
    pub sample_rate: f64,
    /// Time of the first sample, s.
    pub start_time: f64,
    /// Samples in physical units (m/s^2 or rad/s).
    pub samples: Vec<f64>,
}

impl SensorTrace {
    pub fn zeros(sample_rate: f64, start_time: f64, n: usize) -> Self {
        SensorTrace {
            sample_rate,
            start_time,
            samples: vec![0.0; n],
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + (self.samples.len().saturating_sub(1)) as f64 * self.dt()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Linear interpolation; clamps to the end samples.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t - self.start_time) * self.sample_rate;
        if x <= 0.0 {
            return self.samples[0];
        }
        let i = x.floor() as usize;
        if i + 1 >= self.samples.len() {
            return *self.samples.last().unwrap();
        }
        let f = x - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }

    /// Trace CSV: header row `t_s,value`, one sample per line.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "t_s,value")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{:.9},{:.12e}", self.start_time + i as f64 * self.dt(), v)?;
        }
        Ok(())
    }

    /// Binary trace: 8-byte magic, f64 LE sample rate, f64 LE start time,
    /// u64 LE count, then count f64 LE samples.
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(TRACE_MAGIC)?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&self.start_time.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for v in &self.samples {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> std::io::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != TRACE_MAGIC {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "bad trace magic",
            ));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let sample_rate = f64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let start_time = f64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf) as usize;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            samples.push(f64::from_le_bytes(buf));
        }
        Ok(SensorTrace {
            sample_rate,
            start_time,
            samples,
        })
    }
}

/// One node of the piecewise power-spectral-density shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdPoint {
    /// Corner frequency, Hz.
    pub freq_hz: f64,
    /// Relative level (only ratios matter; the trace is scaled to `rms`).
    pub level: f64,
}

/// Parameterized vibration environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibrationModel {
    /// PSD shape nodes, strictly increasing in frequency. The spectrum is
    /// log-log interpolated between nodes and zero outside them.
    pub psd_shape: Vec<PsdPoint>,
    /// Target rms of the generated trace, m/s^2.
    pub rms: f64,
    /// Fraction of the vibration the classical accelerometer cannot see
    /// (bandwidth / transfer-function mismatch), in [0, 1].
    pub residual_fraction: f64,
}

impl VibrationModel {
    pub fn max_corner(&self) -> f64 {
        self.psd_shape
            .iter()
            .map(|p| p.freq_hz)
            .fold(0.0, f64::max)
    }

    /// Relative PSD at `f`, zero outside the node range.
    fn shape_at(&self, f: f64) -> f64 {
        let pts = &self.psd_shape;
        if pts.is_empty() || f < pts[0].freq_hz || f > pts[pts.len() - 1].freq_hz {
            return 0.0;
        }
        for w in pts.windows(2) {
            if f <= w[1].freq_hz {
                if w[0].level <= 0.0 || w[1].level <= 0.0 {
                    return 0.0;
                }
                let lf = (f.ln() - w[0].freq_hz.ln()) / (w[1].freq_hz.ln() - w[0].freq_hz.ln());
                return (w[0].level.ln() + lf * (w[1].level.ln() - w[0].level.ln())).exp();
            }
        }
        pts[pts.len() - 1].level
    }
}

/// Gaussian noise shaped to the model's PSD by spectral-domain synthesis.
/// Deterministic for a given RNG stream.
pub fn gen_vibration(
    model: &VibrationModel,
    duration: f64,
    rate: f64,
    start_time: f64,
    rng: &mut impl Rng,
) -> Result<SensorTrace, CoreError> {
    let max_corner = model.max_corner();
    if rate < 2.0 * max_corner {
        return Err(CoreError::RateTooLow(rate, 2.0 * max_corner));
    }
    let n = (duration * rate).round() as usize;
    if model.rms == 0.0 || n == 0 {
        return Ok(SensorTrace::zeros(rate, start_time, n));
    }
    let df = rate / n as f64;
    // Hermitian spectrum: bin k carries variance S(f_k) df / 2 so that the
    // two-sided sum reproduces the one-sided PSD integral.
    let mut spectrum = vec![Complex::new(0.0, 0.0); n];
    let mut total_var = 0.0;
    let half = n / 2;
    for k in 1..half {
        let f = k as f64 * df;
        let s = model.shape_at(f);
        if s <= 0.0 {
            continue;
        }
        let amp = (s * df / 2.0).sqrt();
        total_var += 2.0 * s * df / 2.0;
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        spectrum[k] = Complex::new(amp / 2f64.sqrt() * g1, amp / 2f64.sqrt() * g2);
        spectrum[n - k] = spectrum[k].conj();
    }
    if total_var <= 0.0 {
        return Ok(SensorTrace::zeros(rate, start_time, n));
    }
    // Scale so the expected variance equals rms^2.
    let scale = model.rms / total_var.sqrt();
    for c in spectrum.iter_mut() {
        *c *= scale;
    }
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut spectrum);
    let samples = spectrum.iter().map(|c| c.re).collect();
    Ok(SensorTrace {
        sample_rate: rate,
        start_time,
        samples,
    })
}

/// Mach-Zehnder acceleration sensitivity weight: a triangle of unit area
/// peaking at the pi pulse, (T + t)/T^2 on [-T, 0], (T - t)/T^2 on [0, T].
pub fn sensitivity_weight(t: f64, t_sep: f64) -> f64 {
    if t <= -t_sep || t >= t_sep {
        0.0
    } else if t <= 0.0 {
        (t_sep + t) / (t_sep * t_sep)
    } else {
        (t_sep - t) / (t_sep * t_sep)
    }
}

/// Trapezoidal quadrature of integral a(t_pi + t) h(t) dt over [-T, T].
///
/// Quadrature nodes are the trace samples inside the window plus the exact
/// endpoints and the kernel kink at t = 0, so constants pass through
/// exactly and odd integrands about t_pi cancel on a symmetric grid.
pub fn convolve_sensitivity(
    trace: &SensorTrace,
    t_pi: f64,
    t_sep: f64,
) -> Result<f64, CoreError> {
    let need_lo = t_pi - t_sep;
    let need_hi = t_pi + t_sep;
    let eps = 0.5 * trace.dt();
    if trace.start_time > need_lo + eps || trace.end_time() < need_hi - eps {
        return Err(CoreError::TraceTooShort {
            lo: trace.start_time,
            hi: trace.end_time(),
            need_lo,
            need_hi,
        });
    }
    let dt = trace.dt();
    // Node list in window time t (relative to t_pi).
    let mut nodes = Vec::new();
    nodes.push(-t_sep);
    let first = ((need_lo - trace.start_time) / dt).ceil() as usize;
    let last = ((need_hi - trace.start_time) / dt).floor() as usize;
    for i in first..=last.min(trace.samples.len() - 1) {
        let t = trace.start_time + i as f64 * dt - t_pi;
        if t > -t_sep + 1e-15 && t < t_sep - 1e-15 {
            nodes.push(t);
        }
    }
    nodes.push(t_sep);
    if !nodes.iter().any(|&t| t.abs() < 1e-15) {
        nodes.push(0.0);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let f = |t: f64| trace.value_at(t_pi + t) * sensitivity_weight(t, t_sep);
    let mut acc = 0.0;
    for w in nodes.windows(2) {
        acc += 0.5 * (f(w[0]) + f(w[1])) * (w[1] - w[0]);
    }
    Ok(acc)
}

/// Classical inertial sensor error model (accelerometer or gyroscope).
///
/// `white_psd` is a noise density in unit/sqrt(Hz) with the Allan-deviation
/// convention sigma(tau) = white_psd / sqrt(tau); the bias random walk has
/// sigma(tau) = bias_rw_coeff sqrt(tau / 3), so the two cross at
/// tau_x = sqrt(3) white_psd / bias_rw_coeff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSensorModel {
    /// White noise density, unit/sqrt(Hz).
    pub white_psd: f64,
    /// Bias random-walk intensity, unit/sqrt(s).
    pub bias_rw_coeff: f64,
    /// Bias at the start of the trace, unit.
    pub initial_bias: f64,
    /// Relative scale-factor error.
    pub scale_error: f64,
}

impl ClassicalSensorModel {
    /// Coefficient that places the white/random-walk ADEV crossover at
    /// `tau_cross` for a given white noise density.
    pub fn rw_coeff_for_crossover(white_psd: f64, tau_cross: f64) -> f64 {
        3f64.sqrt() * white_psd / tau_cross
    }
}

/// Sensor readout of a ground-truth trace:
/// truth * (1 + scale_error) + bias random walk + white noise.
pub fn sample_classical(
    model: &ClassicalSensorModel,
    truth: &SensorTrace,
    rng: &mut impl Rng,
) -> SensorTrace {
    sample_classical_from(model, truth, model.initial_bias, rng).0
}

/// Chunked variant: starts the bias random walk at `bias_in` and returns the
/// final bias so long campaigns can be generated segment by segment.
pub fn sample_classical_from(
    model: &ClassicalSensorModel,
    truth: &SensorTrace,
    bias_in: f64,
    rng: &mut impl Rng,
) -> (SensorTrace, f64) {
    let dt = truth.dt();
    let white_sigma = model.white_psd * truth.sample_rate.sqrt();
    let rw_sigma = model.bias_rw_coeff * dt.sqrt();
    let mut bias = bias_in;
    let samples = truth
        .samples
        .iter()
        .map(|&x| {
            let out = x * (1.0 + model.scale_error)
                + bias
                + white_sigma * rng.sample::<f64, _>(StandardNormal);
            bias += rw_sigma * rng.sample::<f64, _>(StandardNormal);
            out
        })
        .collect();
    (
        SensorTrace {
            sample_rate: truth.sample_rate,
            start_time: truth.start_time,
            samples,
        },
        bias,
    )
}

/// First-order Gauss-Markov process with exact discretization, used for slow
/// physical drifts of the inertial inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussMarkovModel {
    /// Steady-state sigma, in the driven quantity's unit.
    pub sigma: f64,
    /// Correlation time, s.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMarkovState {
    pub value: f64,
}

impl GaussMarkovModel {
    /// Stationary initial draw.
    pub fn init(&self, rng: &mut impl Rng) -> GaussMarkovState {
        GaussMarkovState {
            value: self.sigma * rng.sample::<f64, _>(StandardNormal),
        }
    }

    pub fn step(&self, state: &mut GaussMarkovState, dt: f64, rng: &mut impl Rng) {
        let phi = (-dt / self.tau).exp();
        state.value = phi * state.value
            + self.sigma * (1.0 - phi * phi).sqrt() * rng.sample::<f64, _>(StandardNormal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::allan_deviation;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    fn flat_model(rms: f64) -> VibrationModel {
        VibrationModel {
            psd_shape: vec![
                PsdPoint {
                    freq_hz: 1.0,
                    level: 1.0,
                },
                PsdPoint {
                    freq_hz: 50.0,
                    level: 1.0,
                },
            ],
            rms,
            residual_fraction: 0.2,
        }
    }

    #[test]
    fn vibration_rms_matches_target() {
        let model = flat_model(3.0e-5);
        let mut rng = stream_rng(21, 0);
        let trace = gen_vibration(&model, 200.0, 500.0, 0.0, &mut rng).unwrap();
        assert_relative_eq!(trace.rms(), 3.0e-5, max_relative = 0.05);
    }

    #[test]
    fn vibration_zero_rms_is_silent() {
        let model = flat_model(0.0);
        let mut rng = stream_rng(21, 1);
        let trace = gen_vibration(&model, 10.0, 500.0, 0.0, &mut rng).unwrap();
        assert!(trace.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vibration_seeds_decorrelated() {
        let model = flat_model(1.0);
        let a = gen_vibration(&model, 100.0, 500.0, 0.0, &mut stream_rng(1, 0)).unwrap();
        let b = gen_vibration(&model, 100.0, 500.0, 0.0, &mut stream_rng(2, 0)).unwrap();
        let n = a.samples.len() as f64;
        let dot: f64 = a
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / n;
        let rho = dot / (a.rms() * b.rms());
        assert!(rho.abs() < 0.05, "rho = {rho}");
    }

    #[test]
    fn vibration_rejects_low_rate() {
        let model = flat_model(1.0);
        let err = gen_vibration(&model, 1.0, 60.0, 0.0, &mut stream_rng(1, 0));
        assert!(matches!(err, Err(CoreError::RateTooLow(_, _))));
    }

    #[test]
    fn sensitivity_weight_shape() {
        let t_sep = 0.04;
        assert_relative_eq!(sensitivity_weight(0.0, t_sep), 1.0 / t_sep, epsilon = 1e-15);
        assert_eq!(sensitivity_weight(t_sep, t_sep), 0.0);
        assert_eq!(sensitivity_weight(-t_sep, t_sep), 0.0);
        assert_eq!(sensitivity_weight(1.5 * t_sep, t_sep), 0.0);
        // Unit area by fine quadrature.
        let n = 400_000;
        let dt = 2.0 * t_sep / n as f64;
        let area: f64 = (0..=n)
            .map(|i| {
                let t = -t_sep + i as f64 * dt;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * sensitivity_weight(t, t_sep) * dt
            })
            .sum();
        assert_relative_eq!(area, 1.0, epsilon = 1e-9);
    }

    fn trace_from_fn(rate: f64, t0: f64, t1: f64, f: impl Fn(f64) -> f64) -> SensorTrace {
        let n = ((t1 - t0) * rate).round() as usize + 1;
        SensorTrace {
            sample_rate: rate,
            start_time: t0,
            samples: (0..n).map(|i| f(t0 + i as f64 / rate)).collect(),
        }
    }

    #[test]
    fn convolution_passes_constants_exactly() {
        let trace = trace_from_fn(1000.0, 0.0, 0.2, |_| 2.5);
        let a = convolve_sensitivity(&trace, 0.1, 0.04).unwrap();
        assert_relative_eq!(a, 2.5, epsilon = 1e-9);
    }

    #[test]
    fn convolution_nulls_ramps() {
        let trace = trace_from_fn(1000.0, 0.0, 0.2, |t| 3.0 * (t - 0.1));
        let a = convolve_sensitivity(&trace, 0.1, 0.04).unwrap();
        assert!(a.abs() < 1e-9, "a = {a}");
    }

    #[test]
    fn convolution_rejects_short_trace() {
        let trace = trace_from_fn(1000.0, 0.08, 0.12, |_| 1.0);
        assert!(matches!(
            convolve_sensitivity(&trace, 0.1, 0.04),
            Err(CoreError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn convolution_sinc_null_at_inverse_t() {
        // f = 1/T (25 Hz for T = 40 ms) sits on the sinc^2 null for any
        // phase.
        let t_sep = 0.04;
        for phase in [0.0, 0.7, 2.1] {
            let trace = trace_from_fn(4000.0, 0.0, 0.2, |t| {
                (std::f64::consts::TAU * 25.0 * t + phase).sin()
            });
            let a = convolve_sensitivity(&trace, 0.1, t_sep).unwrap();
            assert!(a.abs() < 1e-3, "phase {phase}: a = {a}");
        }
    }

    #[test]
    fn convolution_general_frequency_sinc_squared() {
        let t_sep = 0.04;
        let f = 7.0;
        let trace = trace_from_fn(4000.0, 0.0, 0.2, |t| {
            (std::f64::consts::TAU * f * (t - 0.1)).cos()
        });
        let a = convolve_sensitivity(&trace, 0.1, t_sep).unwrap();
        let x = std::f64::consts::PI * f * t_sep;
        let expect = (x.sin() / x).powi(2);
        assert_relative_eq!(a, expect, max_relative = 1e-3);
    }

    #[test]
    fn convolution_linear_in_trace() {
        let mut rng = stream_rng(31, 0);
        let a = gen_vibration(&flat_model(1.0), 0.4, 1000.0, 0.0, &mut rng).unwrap();
        let b = gen_vibration(&flat_model(1.0), 0.4, 1000.0, 0.0, &mut rng).unwrap();
        let sum = SensorTrace {
            sample_rate: 1000.0,
            start_time: 0.0,
            samples: a
                .samples
                .iter()
                .zip(&b.samples)
                .map(|(x, y)| 2.0 * x + 3.0 * y)
                .collect(),
        };
        let ca = convolve_sensitivity(&a, 0.2, 0.04).unwrap();
        let cb = convolve_sensitivity(&b, 0.2, 0.04).unwrap();
        let cs = convolve_sensitivity(&sum, 0.2, 0.04).unwrap();
        assert_relative_eq!(cs, 2.0 * ca + 3.0 * cb, epsilon = 1e-12);
    }

    #[test]
    fn classical_sensor_noiseless_is_identity() {
        let model = ClassicalSensorModel {
            white_psd: 0.0,
            bias_rw_coeff: 0.0,
            initial_bias: 0.0,
            scale_error: 0.0,
        };
        let truth = trace_from_fn(100.0, 0.0, 1.0, |t| t.sin());
        let out = sample_classical(&model, &truth, &mut stream_rng(1, 0));
        assert_eq!(out, truth);
    }

    #[test]
    fn classical_sensor_scale_error() {
        let model = ClassicalSensorModel {
            white_psd: 0.0,
            bias_rw_coeff: 0.0,
            initial_bias: 0.0,
            scale_error: 1e-2,
        };
        let truth = trace_from_fn(100.0, 0.0, 1.0, |_| 1.0);
        let out = sample_classical(&model, &truth, &mut stream_rng(1, 0));
        assert!(out.samples.iter().all(|&x| (x - 1.01).abs() < 1e-12));
    }

    #[test]
    fn classical_sensor_adev_crossover() {
        // White floor then random-walk rise crossing at the configured tau.
        let tau_cross = 50.0;
        let model = ClassicalSensorModel {
            white_psd: 1.0,
            bias_rw_coeff: ClassicalSensorModel::rw_coeff_for_crossover(1.0, tau_cross),
            initial_bias: 0.0,
            scale_error: 0.0,
        };
        let truth = SensorTrace::zeros(1.0, 0.0, 200_000);
        let out = sample_classical(&model, &truth, &mut stream_rng(5, 0));
        let curve = allan_deviation(&out.samples, 1.0, &[2.0, 50.0, 2000.0]).unwrap();
        // At the crossover both contributions are equal: sigma = sqrt(2) * white/sqrt(tau).
        let expect_cross = 2f64.sqrt() * 1.0 / tau_cross.sqrt();
        assert_relative_eq!(curve.sigmas[1], expect_cross, max_relative = 0.25);
        // Slopes on each side.
        assert_relative_eq!(curve.sigmas[0], 1.0 / 2f64.sqrt(), max_relative = 0.15);
        let rw = ClassicalSensorModel::rw_coeff_for_crossover(1.0, tau_cross);
        assert_relative_eq!(
            curve.sigmas[2],
            rw * (2000.0f64 / 3.0).sqrt(),
            max_relative = 0.6
        );
    }

    #[test]
    fn binary_trace_round_trip() {
        let trace = trace_from_fn(250.0, 1.5, 2.5, |t| (t * 3.0).cos());
        let mut buf = Vec::new();
        trace.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], TRACE_MAGIC);
        let back = SensorTrace::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, trace);
    }
}
