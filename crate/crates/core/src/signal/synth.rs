//! Synthetic PPG with a known instantaneous heart rate.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trace::{grid_time, Sample, Trace};
use crate::error::{Error, Result};
use crate::hr::{HrSample, HrTrace, MAX_BPM, MIN_BPM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Seconds.
    pub duration: f64,
    /// Hz.
    pub fs: f64,
    pub base_bpm: f64,
    /// Peak deviation from `base_bpm`.
    pub modulation_bpm: f64,
    /// Hz.
    pub modulation_freq: f64,
    pub noise_sigma: f64,
    pub baseline_drift_amp: f64,
    /// Hz.
    pub baseline_drift_freq: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            duration: 60.0,
            fs: 30.0,
            base_bpm: 72.0,
            modulation_bpm: 0.0,
            modulation_freq: 0.1,
            noise_sigma: 0.0,
            baseline_drift_amp: 0.0,
            baseline_drift_freq: 0.05,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Noise standard deviation giving `snr_db` against the unit-amplitude
    /// pulse (signal power 1/2).
    pub fn noise_sigma_for_snr_db(snr_db: f64) -> f64 {
        (0.5 / 10f64.powf(snr_db / 10.0)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.duration,
            self.fs,
            self.base_bpm,
            self.modulation_bpm,
            self.modulation_freq,
            self.noise_sigma,
            self.baseline_drift_amp,
            self.baseline_drift_freq,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config("synthetic spec has non-finite fields".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if self.modulation_bpm < 0.0 || self.modulation_freq < 0.0 || self.baseline_drift_freq < 0.0 {
            return Err(Error::Config("modulation and drift parameters must be non-negative".into()));
        }
        let lo = self.base_bpm - self.modulation_bpm;
        let hi = self.base_bpm + self.modulation_bpm;
        if lo < MIN_BPM || hi > MAX_BPM {
            return Err(Error::Config(format!(
                "heart rate range [{lo}, {hi}] BPM leaves [{MIN_BPM}, {MAX_BPM}]"
            )));
        }
        let needed = 2.0 * hi / 60.0 * 2.0;
        if !(self.fs >= needed) {
            return Err(Error::Config(format!(
                "fs {} Hz below {needed} Hz needed for {hi} BPM with margin",
                self.fs
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    /// Instantaneous frequency at `t`, Hz.
    pub fn frequency_at(&self, t: f64) -> f64 {
        (self.base_bpm + self.modulation_bpm * (2.0 * PI * self.modulation_freq * t).sin()) / 60.0
    }

    /// Running integral of the instantaneous frequency from 0 to `t`, cycles.
    pub fn phase_at(&self, t: f64) -> f64 {
        let mut cycles = self.base_bpm / 60.0 * t;
        if self.modulation_freq > 0.0 {
            let w = 2.0 * PI * self.modulation_freq;
            cycles += self.modulation_bpm / 60.0 * (1.0 - (w * t).cos()) / w;
        }
        cycles
    }

    pub fn drift_at(&self, t: f64) -> f64 {
        self.baseline_drift_amp * (2.0 * PI * self.baseline_drift_freq * t).sin()
    }
}

/// Unbounded sample sequence for `spec`, ignoring its duration. The first
/// `n_samples()` items equal the trace from [`synth_ppg`].
#[derive(Debug, Clone)]
pub struct SynthStream {
    spec: SynthSpec,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    i: usize,
}

impl SynthStream {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let noise = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
        Ok(SynthStream { spec: spec.clone(), rng: ChaCha8Rng::seed_from_u64(spec.seed), noise, i: 0 })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }
}

impl Iterator for SynthStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        let t = grid_time(0.0, self.spec.fs, self.i);
        self.i += 1;
        let mut v = self.spec.drift_at(t) + (2.0 * PI * self.spec.phase_at(t)).sin();
        if self.spec.noise_sigma > 0.0 {
            v += self.noise.sample(&mut self.rng);
        }
        Some(Sample { t, v })
    }
}

/// Generates the trace and the ground-truth heart rate on the same grid.
/// Deterministic for a given spec, seed included.
pub fn synth_ppg(spec: &SynthSpec) -> Result<(Trace, HrTrace)> {
    let n = spec.n_samples();
    let samples: Vec<Sample> = SynthStream::new(spec)?.take(n).collect();
    let truth = samples
        .iter()
        .map(|s| HrSample { t: s.t, bpm: 60.0 * spec.frequency_at(s.t), confidence: 1.0 })
        .collect();
    Ok((Trace::new(samples, spec.fs)?, HrTrace::new(truth)?))
}

/// Pulse peak times (phase at a quarter cycle) within `[0, duration)`.
pub fn beat_times(spec: &SynthSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut beats = Vec::new();
    let mut lo = 0.0;
    let mut k = 0.0;
    loop {
        let target = k + 0.25;
        if spec.phase_at(spec.duration) <= target {
            break;
        }
        // phase is strictly increasing, so bisection brackets the crossing
        let mut hi = spec.duration;
        let mut a = lo;
        for _ in 0..100 {
            let mid = 0.5 * (a + hi);
            if spec.phase_at(mid) < target {
                a = mid;
            } else {
                hi = mid;
            }
            if hi - a < 1e-12 {
                break;
            }
        }
        beats.push(hi);
        lo = hi;
        k += 1.0;
    }
    Ok(beats)
}
