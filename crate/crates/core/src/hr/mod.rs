//! Heart-rate estimation: wavelet ridge estimator, periodogram baseline and
//! beat phase for feedback animation.

pub mod baseline;
pub mod cwt;
pub mod estimator;
pub mod ridge;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baseline::fft_hr_baseline;
pub use cwt::{morlet_cwt, scales_for_band, CwtPlan, Scalogram, WaveletScale};
pub use estimator::{estimate_hr, EstimatorConfig, StreamingEstimator};
pub use ridge::extract_ridge;

pub const MIN_BPM: f64 = 40.0;
pub const MAX_BPM: f64 = 200.0;

/// Frequency band searched for the cardiac component, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardiacBand {
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for CardiacBand {
    fn default() -> Self {
        CardiacBand { f_min: 0.667, f_max: 3.333 }
    }
}

impl CardiacBand {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_max > self.f_min && self.f_max.is_finite()) {
            return Err(Error::Config(format!(
                "cardiac band needs 0 < f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if 60.0 * self.f_min < MIN_BPM - 1e-9 || 60.0 * self.f_max > MAX_BPM + 1e-9 {
            return Err(Error::Config(format!(
                "cardiac band [{}, {}] Hz leaves the {MIN_BPM}-{MAX_BPM} BPM range",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }

    pub fn midpoint_bpm(&self) -> f64 {
        30.0 * (self.f_min + self.f_max)
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.f_min && f <= self.f_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrSample {
    pub t: f64,
    pub bpm: f64,
    pub confidence: f64,
}

/// Instantaneous heart rate series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HrTrace {
    samples: Vec<HrSample>,
}

impl HrTrace {
    pub fn new(samples: Vec<HrSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.bpm >= MIN_BPM - 1e-9 && s.bpm <= MAX_BPM + 1e-9) {
                return Err(Error::Domain(format!(
                    "sample {i}: {} BPM outside [{MIN_BPM}, {MAX_BPM}]",
                    s.bpm
                )));
            }
            if !(0.0..=1.0).contains(&s.confidence) {
                return Err(Error::Domain(format!(
                    "sample {i}: confidence {} outside [0, 1]",
                    s.confidence
                )));
            }
            if !s.t.is_finite() {
                return Err(Error::Domain(format!("sample {i}: non-finite time")));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Precondition(format!(
                "HR timestamps not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(HrTrace { samples })
    }

    pub fn samples(&self) -> &[HrSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<HrSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn bpm(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.bpm).collect()
    }

    pub fn mean_bpm(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().map(|s| s.bpm).sum::<f64>() / self.samples.len() as f64)
        }
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Rate in force at `t` when the series is read as piecewise constant:
    /// the latest sample at or before `t`, or the first sample before the
    /// series starts.
    pub fn held_bpm(&self, t: f64) -> Option<f64> {
        let idx = self.samples.partition_point(|s| s.t <= t);
        match idx {
            0 => self.samples.first().map(|s| s.bpm),
            i => Some(self.samples[i - 1].bpm),
        }
    }

    /// Linear interpolation of (bpm, confidence) at `t`, `None` outside the
    /// covered span. The confidence returned is the lower of the two
    /// bracketing samples.
    pub fn interpolate(&self, t: f64) -> Option<(f64, f64)> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        if idx == self.samples.len() {
            return Some((last.bpm, last.confidence));
        }
        let (a, b) = (self.samples[idx - 1], self.samples[idx]);
        if t == a.t {
            return Some((a.bpm, a.confidence));
        }
        let u = (t - a.t) / (b.t - a.t);
        Some((a.bpm + u * (b.bpm - a.bpm), a.confidence.min(b.confidence)))
    }
}

/// Cyclic position within the current heartbeat, `phase` in [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatPhase {
    pub phase: f64,
    pub as_of: f64,
}

impl BeatPhase {
    pub fn new(phase: f64, as_of: f64) -> Self {
        BeatPhase { phase: phase.rem_euclid(1.0), as_of }
    }
}

/// Advances the beat phase to `now` by integrating the rate, read as
/// piecewise constant, over `[as_of, now]`.
pub fn advance_phase(phase: BeatPhase, hr: &HrTrace, now: f64) -> Result<BeatPhase> {
    if now < phase.as_of {
        return Err(Error::TimeRegression(format!(
            "cannot advance phase from {} back to {now}",
            phase.as_of
        )));
    }
    if hr.is_empty() {
        return Err(Error::InsufficientData("no heart-rate samples to integrate".into()));
    }
    let samples = hr.samples();
    let mut beats = 0.0;
    let mut t = phase.as_of;
    // samples strictly after as_of split the interval into constant pieces
    let mut idx = samples.partition_point(|s| s.t <= t);
    let mut rate = hr.held_bpm(t).unwrap_or(0.0);
    while t < now {
        let next = samples.get(idx).map_or(now, |s| s.t.min(now));
        beats += rate / 60.0 * (next - t);
        t = next;
        if let Some(s) = samples.get(idx) {
            if s.t <= now {
                rate = s.bpm;
                idx += 1;
            }
        }
    }
    Ok(BeatPhase::new(phase.phase + beats, now))
}

/// Phase advanced at a single constant rate.
pub fn advance_phase_constant(phase: BeatPhase, bpm: f64, now: f64) -> Result<BeatPhase> {
    if now < phase.as_of {
        return Err(Error::TimeRegression(format!(
            "cannot advance phase from {} back to {now}",
            phase.as_of
        )));
    }
    Ok(BeatPhase::new(phase.phase + bpm / 60.0 * (now - phase.as_of), now))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(bpm: f64) -> HrTrace {
        HrTrace::new(vec![HrSample { t: 0.0, bpm, confidence: 1.0 }]).unwrap()
    }

    #[test]
    fn band_defaults_and_midpoint() {
        let band = CardiacBand::default();
        band.validate().unwrap();
        assert!((band.midpoint_bpm() - 120.0).abs() < 1e-9);
        assert!(CardiacBand { f_min: 0.5, f_max: 3.0 }.validate().is_err());
        assert!(CardiacBand { f_min: 0.0, f_max: 3.0 }.validate().is_err());
    }

    #[test]
    fn hr_trace_invariants() {
        let ok = HrSample { t: 0.0, bpm: 70.0, confidence: 0.5 };
        assert!(HrTrace::new(vec![ok]).is_ok());
        assert!(HrTrace::new(vec![HrSample { bpm: 30.0, ..ok }]).is_err());
        assert!(HrTrace::new(vec![HrSample { confidence: 1.5, ..ok }]).is_err());
        assert!(HrTrace::new(vec![ok, ok]).is_err());
    }

    #[test]
    fn one_second_at_60_bpm_is_one_beat() {
        let p = advance_phase(BeatPhase::new(0.3, 10.0), &constant(60.0), 11.0).unwrap();
        assert!((p.phase - 0.3).abs() < 1e-12);
        assert_eq!(p.as_of, 11.0);
    }

    #[test]
    fn quarter_second_at_120_bpm() {
        let p = advance_phase(BeatPhase::new(0.1, 0.0), &constant(120.0), 0.25).unwrap();
        assert!((p.phase - 0.6).abs() < 1e-12);
    }

    #[test]
    fn piecewise_rates() {
        let hr = HrTrace::new(vec![
            HrSample { t: 0.0, bpm: 60.0, confidence: 1.0 },
            HrSample { t: 1.0, bpm: 90.0, confidence: 1.0 },
        ])
        .unwrap();
        let p = advance_phase(BeatPhase::new(0.0, 0.0), &hr, 2.0).unwrap();
        assert!((p.phase - 0.5).abs() < 1e-12);
    }

    #[test]
    fn regression_is_an_error() {
        let err = advance_phase(BeatPhase::new(0.0, 5.0), &constant(60.0), 4.0).unwrap_err();
        assert!(matches!(err, Error::TimeRegression(_)));
    }

    #[test]
    fn interpolation_and_hold() {
        let hr = HrTrace::new(vec![
            HrSample { t: 0.0, bpm: 60.0, confidence: 1.0 },
            HrSample { t: 2.0, bpm: 80.0, confidence: 0.0 },
        ])
        .unwrap();
        assert_eq!(hr.interpolate(1.0), Some((70.0, 0.0)));
        assert_eq!(hr.interpolate(0.0), Some((60.0, 1.0)));
        assert_eq!(hr.interpolate(2.5), None);
        assert_eq!(hr.held_bpm(-1.0), Some(60.0));
        assert_eq!(hr.held_bpm(1.9), Some(60.0));
        assert_eq!(hr.held_bpm(2.0), Some(80.0));
    }
}
