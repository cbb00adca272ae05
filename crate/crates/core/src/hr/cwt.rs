//! Morlet continuous wavelet transform over the cardiac band.
//!
//! The transform is a cross-correlation of the trace with the sampled,
//! L2-normalised analytic Morlet wavelet at each scale, evaluated by FFT
//! with enough zero padding that no circular wrap-around reaches the output.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::CardiacBand;
use crate::error::{Error, Result};
use crate::signal::Trace;

/// Morlet centre frequency (rad per unit scale).
pub const OMEGA0: f64 = 6.0;

/// Envelope truncation in units of scale; exp(-8^2/2) is below 1e-13.
const SUPPORT_SIGMAS: f64 = 8.0;

/// One analysis scale and the centre frequency it is tuned to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletScale {
    pub freq: f64,
    pub scale: f64,
}

impl WaveletScale {
    pub fn from_freq(freq: f64) -> Self {
        WaveletScale { freq, scale: OMEGA0 / (2.0 * PI * freq) }
    }

    /// Half-width of the cone of influence in seconds.
    pub fn coi_width(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.scale
    }
}

/// `n` log-spaced centre frequencies spanning the band, endpoints included.
pub fn scales_for_band(band: &CardiacBand, n: usize) -> Result<Vec<WaveletScale>> {
    band.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 scales, got {n}")));
    }
    let (lo, hi) = (band.f_min.ln(), band.f_max.ln());
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let freq = if i == 0 {
                band.f_min
            } else if i == n - 1 {
                band.f_max
            } else {
                (lo + step * i as f64).exp()
            };
            WaveletScale::from_freq(freq)
        })
        .collect())
}

/// Sampled Morlet wavelet at integer lag `k`, L2-normalised for scale `s`
/// and sample interval `dt`.
pub fn morlet_tap(k: i64, dt: f64, s: f64) -> Complex64 {
    let u = k as f64 * dt / s;
    let norm = (dt / s).sqrt() * PI.powf(-0.25);
    Complex64::from_polar(norm * (-0.5 * u * u).exp(), OMEGA0 * u)
}

/// Precomputed wavelet spectra for one signal length, rate and scale set.
pub struct CwtPlan {
    len: usize,
    fs: f64,
    scales: Vec<WaveletScale>,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// conj(FFT(wavelet)) / fft_len, one row per scale.
    kernels: Vec<Vec<Complex64>>,
}

impl std::fmt::Debug for CwtPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CwtPlan")
            .field("len", &self.len)
            .field("fs", &self.fs)
            .field("scales", &self.scales.len())
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl CwtPlan {
    pub fn new(len: usize, fs: f64, scales: &[WaveletScale]) -> Result<Self> {
        if len == 0 {
            return Err(Error::InsufficientData("empty trace".into()));
        }
        if scales.is_empty() {
            return Err(Error::Config("no wavelet scales".into()));
        }
        let dt = 1.0 / fs;
        let half_support = |s: f64| ((SUPPORT_SIGMAS * s * fs).ceil() as usize).min(len - 1);
        let max_half = scales.iter().map(|w| half_support(w.scale)).max().unwrap_or(0);
        let fft_len = (len + max_half).next_power_of_two();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);

        let inv_n = 1.0 / fft_len as f64;
        let kernels = scales
            .iter()
            .map(|w| {
                let m = half_support(w.scale) as i64;
                let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
                for k in -m..=m {
                    buf[k.rem_euclid(fft_len as i64) as usize] = morlet_tap(k, dt, w.scale);
                }
                forward.process(&mut buf);
                buf.iter_mut().for_each(|c| *c = c.conj() * inv_n);
                buf
            })
            .collect();

        Ok(CwtPlan {
            len,
            fs,
            scales: scales.to_vec(),
            fft_len,
            forward,
            inverse,
            kernels,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn scales(&self) -> &[WaveletScale] {
        &self.scales
    }

    /// Complex coefficients, one row of `len` values per scale.
    pub fn coefficients(&self, values: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        if values.len() != self.len {
            return Err(Error::Precondition(format!(
                "plan built for {} samples, got {}",
                self.len,
                values.len()
            )));
        }
        let mut spectrum: Vec<Complex64> = values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(self.fft_len)
            .collect();
        self.forward.process(&mut spectrum);

        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        Ok(self
            .kernels
            .iter()
            .map(|kernel| {
                let mut buf: Vec<Complex64> =
                    spectrum.iter().zip(kernel).map(|(x, k)| x * k).collect();
                self.inverse.process_with_scratch(&mut buf, &mut scratch);
                buf.truncate(self.len);
                buf
            })
            .collect())
    }

    /// Scalogram of a uniform trace whose length and rate match the plan.
    pub fn scalogram(&self, trace: &Trace) -> Result<Scalogram> {
        trace.require_uniform()?;
        if (trace.nominal_fs() - self.fs).abs() > 1e-9 * self.fs {
            return Err(Error::Precondition(format!(
                "plan built for {} Hz, trace is {} Hz",
                self.fs,
                trace.nominal_fs()
            )));
        }
        let coeffs = self.coefficients(&trace.values())?;
        let times: Vec<f64> = trace.samples().iter().map(|s| s.t).collect();
        let n_f = self.scales.len();
        let mut power = vec![0.0; times.len() * n_f];
        for (fi, row) in coeffs.iter().enumerate() {
            for (ti, c) in row.iter().enumerate() {
                power[ti * n_f + fi] = c.norm_sqr();
            }
        }
        Scalogram::from_parts(times, self.scales.clone(), power)
    }
}

/// Morlet CWT power of a uniform trace.
pub fn morlet_cwt(trace: &Trace, scales: &[WaveletScale]) -> Result<Scalogram> {
    trace.require_uniform()?;
    CwtPlan::new(trace.len(), trace.nominal_fs(), scales)?.scalogram(trace)
}

/// Time x frequency matrix of |CWT|^2, stored row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    times: Vec<f64>,
    scales: Vec<WaveletScale>,
    power: Vec<f64>,
}

impl Scalogram {
    /// Builds a scalogram from a frequency grid; scales follow the Morlet
    /// frequency relation.
    pub fn new(times: Vec<f64>, freqs: &[f64], power: Vec<f64>) -> Result<Self> {
        let scales = freqs.iter().map(|&f| WaveletScale::from_freq(f)).collect();
        Scalogram::from_parts(times, scales, power)
    }

    fn from_parts(times: Vec<f64>, scales: Vec<WaveletScale>, power: Vec<f64>) -> Result<Self> {
        if power.len() != times.len() * scales.len() {
            return Err(Error::Precondition(format!(
                "power has {} cells, grid is {}x{}",
                power.len(),
                times.len(),
                scales.len()
            )));
        }
        if scales.is_empty() || times.is_empty() {
            return Err(Error::Precondition("degenerate scalogram grid".into()));
        }
        if scales.windows(2).any(|w| !(w[1].freq > w[0].freq)) {
            return Err(Error::Precondition("frequencies must be strictly increasing".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("times must be strictly increasing".into()));
        }
        if power.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Precondition("power must be non-negative".into()));
        }
        Ok(Scalogram { times, scales, power })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.scales.iter().map(|w| w.freq).collect()
    }

    pub fn scales(&self) -> &[WaveletScale] {
        &self.scales
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.scales.len()
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn column(&self, ti: usize) -> &[f64] {
        let n = self.scales.len();
        &self.power[ti * n..(ti + 1) * n]
    }

    pub fn at(&self, ti: usize, fi: usize) -> f64 {
        self.power[ti * self.scales.len() + fi]
    }

    fn edge_distance(&self, ti: usize) -> f64 {
        let t = self.times[ti];
        (t - self.times[0]).min(self.times[self.times.len() - 1] - t)
    }

    /// Whether cell (ti, fi) lies inside that scale's cone of influence.
    pub fn in_coi(&self, ti: usize, fi: usize) -> bool {
        self.edge_distance(ti) < self.scales[fi].coi_width()
    }

    /// True when the column is inside the cone of influence at every scale.
    pub fn column_in_coi(&self, ti: usize) -> bool {
        let narrowest = self
            .scales
            .iter()
            .map(WaveletScale::coi_width)
            .fold(f64::INFINITY, f64::min);
        self.edge_distance(ti) < narrowest
    }
}
