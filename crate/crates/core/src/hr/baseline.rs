//! Windowed-periodogram heart-rate estimator, used as an independent
//! cross-check of the wavelet ridge.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{CardiacBand, HrSample, HrTrace};
use crate::error::{Error, Result};
use crate::signal::trace::grid_time;
use crate::signal::{resample_uniform, Trace};

/// Zero-padding factor for the periodogram.
const PAD_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub fs: f64,
    pub band: CardiacBand,
    /// Window length, seconds.
    pub window: f64,
    /// Hop, seconds.
    pub hop: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { fs: 30.0, band: CardiacBand::default(), window: 20.0, hop: 1.0 }
    }
}

/// Periodogram-peak heart rate over sliding windows with the default
/// band, rate and a 1 s hop. Samples are stamped at window centres.
pub fn fft_hr_baseline(trace: &Trace, window: f64) -> Result<HrTrace> {
    fft_hr_baseline_with(trace, &BaselineConfig { window, ..Default::default() })
}

pub fn fft_hr_baseline_with(trace: &Trace, config: &BaselineConfig) -> Result<HrTrace> {
    config.band.validate()?;
    if !(config.window >= 10.0) {
        return Err(Error::Config(format!("baseline window must be at least 10 s, got {}", config.window)));
    }
    if !(config.hop > 0.0) {
        return Err(Error::Config("hop must be positive".into()));
    }
    if trace.len() < 2 || trace.span() < config.window - 1e-9 {
        return Err(Error::InsufficientData(format!(
            "trace spans {:.3} s, need at least {} s",
            trace.span(),
            config.window
        )));
    }
    let uniform = resample_uniform(trace, config.fs)?;
    let values = uniform.values();
    let t0 = uniform.start().expect("non-empty");
    let len = (config.window * config.fs).round() as usize + 1;
    let hop = ((config.hop * config.fs).round() as usize).max(1);

    let fft_len = (len * PAD_FACTOR).next_power_of_two();
    let fft = FftPlanner::new().plan_fft_forward(fft_len);
    let hann: Vec<f64> = (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
        .collect();
    let bin_hz = config.fs / fft_len as f64;
    let lo_bin = (config.band.f_min / bin_hz).ceil() as usize;
    let hi_bin = ((config.band.f_max / bin_hz).floor() as usize).min(fft_len / 2);
    // Hann main lobe half-width: two unpadded bins
    let lobe = ((2.0 * config.fs / len as f64) / bin_hz).round() as usize;
    let flat_share = ((2 * lobe + 1) as f64 / (hi_bin - lo_bin + 1) as f64).min(1.0);

    let mut out = Vec::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    let mut start = 0;
    while start + len <= values.len() {
        let seg = &values[start..start + len];
        let mean = seg.iter().sum::<f64>() / len as f64;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, (&v, w)) in seg.iter().zip(&hann).enumerate() {
            buf[i] = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..=fft_len / 2].iter().map(|c| c.norm_sqr()).collect();

        let band = &power[lo_bin..=hi_bin];
        let total: f64 = band.iter().sum();
        let centre = grid_time(t0, config.fs, start + (len - 1) / 2);
        if total <= 0.0 {
            out.push(HrSample { t: centre, bpm: config.band.midpoint_bpm(), confidence: 0.0 });
        } else {
            let peak = lo_bin
                + (0..band.len())
                    .max_by(|&a, &b| band[a].total_cmp(&band[b]))
                    .unwrap_or(0);
            let f = interpolate_peak(&power, peak) * bin_hz;
            let bpm = (60.0 * f).clamp(60.0 * config.band.f_min, 60.0 * config.band.f_max);
            let lobe_power: f64 = power[peak.saturating_sub(lobe).max(lo_bin)..=(peak + lobe).min(hi_bin)]
                .iter()
                .sum();
            let share = lobe_power / total;
            let confidence = if flat_share < 1.0 {
                ((share - flat_share) / (1.0 - flat_share)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            out.push(HrSample { t: centre, bpm, confidence });
        }
        start += hop;
    }
    HrTrace::new(out)
}

/// Peak position in bins from a three-point parabola through log power,
/// falling back to linear power when a neighbour is zero.
fn interpolate_peak(power: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= power.len() {
        return k as f64;
    }
    let (a, b, c) = (power[k - 1], power[k], power[k + 1]);
    let (a, b, c) = if a > 0.0 && c > 0.0 { (a.ln(), b.ln(), c.ln()) } else { (a, b, c) };
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return k as f64;
    }
    k as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}
