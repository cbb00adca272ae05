//! Time-stamped scalar traces, uniform resampling and moving-average detrend.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub v: f64,
}

/// Raw PPG signal for one person. Timestamps are seconds and strictly
/// increasing; `nominal_fs` is the rate the samples were taken at (or
/// resampled to).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    samples: Vec<Sample>,
    nominal_fs: f64,
}

/// Relative tolerance on sample spacing for a trace to count as uniform.
const UNIFORM_REL_TOL: f64 = 1e-6;

impl Trace {
    pub fn new(samples: Vec<Sample>, nominal_fs: f64) -> Result<Self> {
        if !(nominal_fs > 0.0 && nominal_fs.is_finite()) {
            return Err(Error::Config(format!("nominal_fs must be positive, got {nominal_fs}")));
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::Precondition(format!(
                    "timestamps not strictly increasing at sample {}: {} then {}",
                    i + 1,
                    pair[0].t,
                    pair[1].t
                )));
            }
        }
        if let Some(bad) = samples.iter().find(|s| !s.t.is_finite() || !s.v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite sample {bad:?}")));
        }
        Ok(Trace { samples, nominal_fs })
    }

    /// Builds a trace on the grid `t0 + i / fs`.
    pub fn from_uniform(t0: f64, fs: f64, values: &[f64]) -> Result<Self> {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample { t: grid_time(t0, fs, i), v })
            .collect();
        Trace::new(samples, fs)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn nominal_fs(&self) -> f64 {
        self.nominal_fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.v).collect()
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    /// Time between first and last sample, zero for fewer than two samples.
    pub fn span(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn is_uniform(&self) -> bool {
        let dt = 1.0 / self.nominal_fs;
        self.samples
            .windows(2)
            .all(|p| ((p[1].t - p[0].t) - dt).abs() <= UNIFORM_REL_TOL * dt)
    }

    pub(crate) fn require_uniform(&self) -> Result<()> {
        if self.is_uniform() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "trace is not uniformly sampled at {} Hz",
                self.nominal_fs
            )))
        }
    }

    /// Shifts every timestamp by `dt` seconds.
    pub fn shifted(&self, dt: f64) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample { t: s.t + dt, v: s.v })
            .collect();
        Trace::new(samples, self.nominal_fs)
    }
}

/// Grid point `i` of a uniform grid. Computed directly rather than by
/// accumulation so spacing stays exact to rounding.
pub fn grid_time(t0: f64, fs: f64, i: usize) -> f64 {
    t0 + i as f64 / fs
}

/// Linear interpolation onto `t0, t0 + 1/fs, ...` up to the last sample.
pub fn resample_uniform(trace: &Trace, fs: f64) -> Result<Trace> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Config(format!("resample rate must be positive, got {fs}")));
    }
    let samples = trace.samples();
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "resampling needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let t0 = samples[0].t;
    let t_end = samples[samples.len() - 1].t;
    // tolerate rounding in the last grid point
    let n = ((t_end - t0) * fs * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let t = grid_time(t0, fs, i);
        while seg + 2 < samples.len() && samples[seg + 1].t <= t {
            seg += 1;
        }
        let (a, b) = (samples[seg], samples[seg + 1]);
        let v = if t == a.t {
            a.v
        } else if t == b.t {
            b.v
        } else {
            let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            a.v + u * (b.v - a.v)
        };
        out.push(Sample { t, v });
    }
    Trace::new(out, fs)
}

/// Number of samples in the centered averaging window, always odd.
pub fn detrend_window_len(window: f64, fs: f64) -> usize {
    2 * (window * fs / 2.0).round().max(0.0) as usize + 1
}

/// Subtracts the centered moving average over `window` seconds. Near the
/// edges the window is truncated to the samples available.
pub fn detrend(trace: &Trace, window: f64) -> Result<Trace> {
    trace.require_uniform()?;
    let fs = trace.nominal_fs();
    let len = detrend_window_len(window, fs);
    if !(window > 0.0) || len < 3 || (window * fs) < 3.0 - 1e-9 {
        return Err(Error::Config(format!(
            "detrend window {window} s covers fewer than 3 samples at {fs} Hz"
        )));
    }
    let values = trace.values();
    let detrended = subtract_moving_average(&values, len / 2);
    let samples = trace
        .samples()
        .iter()
        .zip(detrended)
        .map(|(s, v)| Sample { t: s.t, v })
        .collect();
    Trace::new(samples, fs)
}

pub(crate) fn subtract_moving_average(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let mean = values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            values[i] - mean
        })
        .collect()
}
