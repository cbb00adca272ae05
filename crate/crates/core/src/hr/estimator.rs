//! Sliding-window wavelet heart-rate estimator, batch and streaming.
//!
//! Each window is resampled, detrended, transformed and ridge-tracked on its
//! own, so the streaming estimator reproduces the batch output sample for
//! sample. A window contributes the ridge value at a column far enough from
//! its trailing edge to be clear of the widest cone of influence; the first
//! window also fills in its own interior so output starts early.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::cwt::{scales_for_band, CwtPlan, WaveletScale};
use super::ridge::extract_ridge_with;
use super::{CardiacBand, HrSample, HrTrace};
use crate::error::{Error, Result};
use crate::signal::trace::grid_time;
use crate::signal::{detrend, resample_uniform, Sample, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Uniform analysis rate, Hz.
    pub fs: f64,
    pub band: CardiacBand,
    pub n_scales: usize,
    /// Analysis window, seconds.
    pub window: f64,
    /// Window hop and output cadence, seconds.
    pub hop: f64,
    /// Moving-average detrend span, seconds.
    pub detrend_window: f64,
    /// Ridge median smoothing span, seconds.
    pub smoothing: f64,
    /// Shortest trace accepted, seconds.
    pub min_span: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            fs: 30.0,
            band: CardiacBand::default(),
            n_scales: 64,
            window: 20.0,
            hop: 1.0,
            detrend_window: 10.0,
            smoothing: super::ridge::RIDGE_SMOOTHING_S,
            min_span: 10.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.band.validate()?;
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::Config(format!("fs must be positive, got {}", self.fs)));
        }
        if self.fs < 2.0 * self.band.f_max {
            return Err(Error::Config(format!(
                "fs {} Hz cannot represent the band up to {} Hz",
                self.fs, self.band.f_max
            )));
        }
        if self.n_scales < 2 {
            return Err(Error::Config(format!("need at least 2 scales, got {}", self.n_scales)));
        }
        if !(self.hop > 0.0) || !is_whole(self.hop * self.fs) {
            return Err(Error::Config(format!(
                "hop {} s must be a whole number of samples at {} Hz",
                self.hop, self.fs
            )));
        }
        if !(self.window >= self.min_span) || !is_whole(self.window / self.hop) {
            return Err(Error::Config(format!(
                "window {} s must be at least {} s and a whole number of hops",
                self.window, self.min_span
            )));
        }
        if self.detrend_window * self.fs < 3.0 - 1e-9 {
            return Err(Error::Config(format!(
                "detrend window {} s covers fewer than 3 samples",
                self.detrend_window
            )));
        }
        if !(self.smoothing >= 0.0) {
            return Err(Error::Config("smoothing span must be non-negative".into()));
        }
        let guard = self.guard_seconds();
        if 2.0 * guard > self.min_span {
            return Err(Error::Config(format!(
                "band lower edge {} Hz needs {guard} s edge guards, more than the {} s minimum span allows",
                self.band.f_min, self.min_span
            )));
        }
        Ok(())
    }

    pub fn scales(&self) -> Result<Vec<WaveletScale>> {
        scales_for_band(&self.band, self.n_scales)
    }

    /// Distance kept from window edges, whole hops covering the widest cone
    /// of influence.
    pub fn guard_seconds(&self) -> f64 {
        let widest = WaveletScale::from_freq(self.band.f_min).coi_width();
        (widest / self.hop).ceil() * self.hop
    }

    fn samples(&self, seconds: f64) -> usize {
        (seconds * self.fs).round() as usize
    }
}

fn is_whole(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9 && x.round() >= 1.0
}

/// Per-window processing shared by the batch and streaming paths.
#[derive(Debug)]
pub(crate) struct WindowProcessor {
    config: EstimatorConfig,
    scales: Vec<WaveletScale>,
    plan: Option<CwtPlan>,
}

impl WindowProcessor {
    fn new(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let scales = config.scales()?;
        Ok(WindowProcessor { config, scales, plan: None })
    }

    /// Ridge over one window whose first sample is grid point `start`.
    fn ridge(&mut self, t0: f64, start: usize, values: &[f64]) -> Result<HrTrace> {
        let fs = self.config.fs;
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample { t: grid_time(t0, fs, start + i), v })
            .collect();
        let window = Trace::new(samples, fs)?;
        let conditioned = detrend(&window, self.config.detrend_window)?;
        if self.plan.as_ref().is_none_or(|p| p.len() != values.len()) {
            self.plan = Some(CwtPlan::new(values.len(), fs, &self.scales)?);
        }
        let plan = self.plan.as_ref().expect("plan built above");
        let scalogram = plan.scalogram(&conditioned)?;
        extract_ridge_with(&scalogram, self.config.smoothing)
    }

    /// Output columns (relative to the window) for window number `k` of
    /// length `len`.
    fn emitted_columns(&self, k: usize, len: usize) -> Vec<usize> {
        let guard = self.config.samples(self.config.guard_seconds());
        let hop = self.config.samples(self.config.hop);
        let last = len - 1 - guard;
        if k == 0 {
            (guard..=last).step_by(hop).collect()
        } else {
            vec![last]
        }
    }

    fn emit(&mut self, t0: f64, start: usize, k: usize, values: &[f64]) -> Result<Vec<HrSample>> {
        let ridge = self.ridge(t0, start, values)?;
        Ok(self
            .emitted_columns(k, values.len())
            .into_iter()
            .map(|c| ridge.samples()[c])
            .collect())
    }
}

/// Instantaneous heart rate of a trace: resample, then per 20 s window
/// detrend, wavelet transform and ridge, one output sample per hop.
pub fn estimate_hr(trace: &Trace, config: &EstimatorConfig) -> Result<HrTrace> {
    let mut proc = WindowProcessor::new(config.clone())?;
    if trace.len() < 2 || trace.span() < config.min_span - 1e-9 {
        return Err(Error::InsufficientData(format!(
            "trace spans {:.3} s, need at least {} s",
            trace.span(),
            config.min_span
        )));
    }
    let uniform = resample_uniform(trace, config.fs)?;
    let values = uniform.values();
    let t0 = uniform.start().expect("non-empty trace");
    let n = values.len();
    let win = config.samples(config.window) + 1;
    let hop = config.samples(config.hop);

    let mut out = Vec::new();
    if n < win {
        // shorter than one window: the whole trace is the window, trimmed to
        // whole hops so emitted columns stay on the output grid
        let len = n - (n - 1) % hop;
        out.extend(proc.emit(t0, 0, 0, &values[..len])?);
    } else {
        let mut k = 0;
        while k * hop + win <= n {
            let start = k * hop;
            out.extend(proc.emit(t0, start, k, &values[start..start + win])?);
            k += 1;
        }
    }
    HrTrace::new(out)
}

/// Incremental estimator fed one raw sample at a time. Produces exactly the
/// samples `estimate_hr` would for the same input once each window fills.
#[derive(Debug)]
pub struct StreamingEstimator {
    proc: WindowProcessor,
    t0: Option<f64>,
    last: Option<Sample>,
    /// Uniform samples starting at grid index `base`.
    buffer: VecDeque<f64>,
    base: usize,
    produced: usize,
    next_window: usize,
    win: usize,
    hop: usize,
}

impl StreamingEstimator {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        let win = config.samples(config.window) + 1;
        let hop = config.samples(config.hop);
        let proc = WindowProcessor::new(config)?;
        Ok(StreamingEstimator {
            proc,
            t0: None,
            last: None,
            buffer: VecDeque::with_capacity(win + hop),
            base: 0,
            produced: 0,
            next_window: 0,
            win,
            hop,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.proc.config
    }

    /// Windows completed so far.
    pub fn windows_processed(&self) -> usize {
        self.next_window
    }

    /// Feeds one raw sample; returns any heart-rate samples that became
    /// available.
    pub fn push(&mut self, t: f64, v: f64) -> Result<Vec<HrSample>> {
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::Precondition(format!("non-finite sample ({t}, {v})")));
        }
        let fs = self.proc.config.fs;
        let Some(t0) = self.t0 else {
            self.t0 = Some(t);
            self.last = Some(Sample { t, v });
            self.buffer.push_back(v);
            self.produced = 1;
            return Ok(Vec::new());
        };
        let a = self.last.expect("initialised with t0");
        if !(t > a.t) {
            return Err(Error::TimeRegression(format!("sample at {t} s after {} s", a.t)));
        }
        let b = Sample { t, v };
        loop {
            let gt = grid_time(t0, fs, self.produced);
            if gt > b.t {
                break;
            }
            let value = if gt == a.t {
                a.v
            } else if gt == b.t {
                b.v
            } else {
                let u = ((gt - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                a.v + u * (b.v - a.v)
            };
            self.buffer.push_back(value);
            self.produced += 1;
        }
        self.last = Some(b);

        let mut out = Vec::new();
        while self.next_window * self.hop + self.win <= self.produced {
            let start = self.next_window * self.hop;
            let offset = start - self.base;
            let values: Vec<f64> = self.buffer.range(offset..offset + self.win).copied().collect();
            out.extend(self.proc.emit(t0, start, self.next_window, &values)?);
            self.next_window += 1;
            let keep_from = self.next_window * self.hop;
            while self.base < keep_from {
                self.buffer.pop_front();
                self.base += 1;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synth::{synth_ppg, SynthSpec};

    fn spec(base: f64, modulation: f64, noise: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            duration: 60.0,
            fs: 30.0,
            base_bpm: base,
            modulation_bpm: modulation,
            modulation_freq: 0.1,
            noise_sigma: noise,
            baseline_drift_amp: 0.0,
            baseline_drift_freq: 0.05,
            seed,
        }
    }

    #[test]
    fn constant_72_without_noise() {
        let (trace, _) = synth_ppg(&spec(72.0, 0.0, 0.0, 1)).unwrap();
        let hr = estimate_hr(&trace, &EstimatorConfig::default()).unwrap();
        let mean = hr.mean_bpm().unwrap();
        assert!((mean - 72.0).abs() < 2.0, "{mean}");
        assert!(hr.samples().iter().all(|s| (s.bpm - 72.0).abs() < 2.0));
    }

    #[test]
    fn output_cadence_is_one_hertz() {
        let (trace, _) = synth_ppg(&spec(65.0, 0.0, 0.05, 2)).unwrap();
        let hr = estimate_hr(&trace, &EstimatorConfig::default()).unwrap();
        for w in hr.samples().windows(2) {
            assert!((w[1].t - w[0].t - 1.0).abs() < 1e-9);
        }
        let guard = EstimatorConfig::default().guard_seconds();
        assert!((hr.samples()[0].t - guard).abs() < 1e-9);
    }

    #[test]
    fn constant_trace_has_zero_confidence() {
        let trace = Trace::from_uniform(0.0, 30.0, &vec![5.0; 30 * 40]).unwrap();
        let hr = estimate_hr(&trace, &EstimatorConfig::default()).unwrap();
        assert!(!hr.is_empty());
        assert!(hr.samples().iter().all(|s| s.confidence == 0.0));
    }

    #[test]
    fn short_trace_rejected() {
        let trace = Trace::from_uniform(0.0, 30.0, &vec![0.0; 250]).unwrap();
        assert!(matches!(
            estimate_hr(&trace, &EstimatorConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn trace_between_min_span_and_window() {
        let mut s = spec(90.0, 0.0, 0.0, 3);
        s.duration = 14.0;
        let (trace, _) = synth_ppg(&s).unwrap();
        let hr = estimate_hr(&trace, &EstimatorConfig::default()).unwrap();
        assert!(!hr.is_empty());
        assert!(hr.samples().iter().all(|x| (x.bpm - 90.0).abs() < 3.0));
    }

    #[test]
    fn streaming_matches_batch() {
        let (trace, _) = synth_ppg(&spec(70.0, 8.0, 0.2, 4)).unwrap();
        let config = EstimatorConfig::default();
        let batch = estimate_hr(&trace, &config).unwrap();
        let mut stream = StreamingEstimator::new(config).unwrap();
        let mut got = Vec::new();
        for s in trace.samples() {
            got.extend(stream.push(s.t, s.v).unwrap());
        }
        assert_eq!(got.len(), batch.len());
        for (a, b) in got.iter().zip(batch.samples()) {
            assert!((a.t - b.t).abs() < 1e-9);
            assert!((a.bpm - b.bpm).abs() < 1e-9);
            assert!((a.confidence - b.confidence).abs() < 1e-9);
        }
    }

    #[test]
    fn streaming_rejects_regression() {
        let mut stream = StreamingEstimator::new(EstimatorConfig::default()).unwrap();
        stream.push(1.0, 0.0).unwrap();
        assert!(matches!(stream.push(1.0, 0.0), Err(Error::TimeRegression(_))));
    }

    #[test]
    fn config_validation() {
        let bad = EstimatorConfig { hop: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EstimatorConfig { window: 9.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EstimatorConfig { detrend_window: 0.05, ..Default::default() };
        assert!(bad.validate().is_err());
        EstimatorConfig::default().validate().unwrap();
        assert_eq!(EstimatorConfig::default().guard_seconds(), 3.0);
    }
}
