//! Agreement between an estimated heart-rate series and a reference.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hr::{HrSample, HrTrace, MAX_BPM, MIN_BPM};

/// Minimum overlap between estimate and reference, seconds.
pub const MIN_OVERLAP_S: f64 = 30.0;

/// Comparison grid spacing, seconds.
pub const GRID_STEP_S: f64 = 1.0;

/// ECG R-peak times in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RrSeries {
    beats: Vec<f64>,
}

impl RrSeries {
    pub fn new(beats: Vec<f64>) -> Result<Self> {
        if let Some(i) = beats.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition(format!(
                "beat times not strictly increasing at beat {}",
                i + 1
            )));
        }
        Ok(RrSeries { beats })
    }

    pub fn beats(&self) -> &[f64] {
        &self.beats
    }

    /// Indices of intervals whose length falls outside the 40-200 BPM range.
    pub fn flagged_intervals(&self) -> Vec<usize> {
        self.beats
            .windows(2)
            .enumerate()
            .filter(|(_, w)| !interval_plausible(w[1] - w[0]))
            .map(|(i, _)| i)
            .collect()
    }
}

fn interval_plausible(rr: f64) -> bool {
    rr >= 60.0 / MAX_BPM - 1e-12 && rr <= 60.0 / MIN_BPM + 1e-12
}

/// Instantaneous heart rate `60 / rr` placed at interval midpoints and
/// linearly interpolated onto a grid of rate `fs`. Flagged intervals are
/// skipped.
pub fn rr_to_hr(rr: &RrSeries, fs: f64) -> Result<HrTrace> {
    if !(fs > 0.0) {
        return Err(Error::Config(format!("fs must be positive, got {fs}")));
    }
    let beats = rr.beats();
    if beats.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 beats, got {}", beats.len())));
    }
    let points: Vec<(f64, f64)> = beats
        .windows(2)
        .filter(|w| interval_plausible(w[1] - w[0]))
        .map(|w| (0.5 * (w[0] + w[1]), 60.0 / (w[1] - w[0])))
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 plausible RR intervals after flagging".into(),
        ));
    }
    let (t_start, t_end) = (points[0].0, points[points.len() - 1].0);
    let n = ((t_end - t_start) * fs + 1e-9).floor() as usize + 1;
    let mut seg = 0;
    let samples = (0..n)
        .map(|i| {
            let t = t_start + i as f64 / fs;
            while seg + 2 < points.len() && points[seg + 1].0 <= t {
                seg += 1;
            }
            let (a, b) = (points[seg], points[seg + 1]);
            let u = ((t - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
            HrSample { t, bpm: a.1 + u * (b.1 - a.1), confidence: 1.0 }
        })
        .collect();
    HrTrace::new(samples)
}

/// Sample Pearson correlation, two-pass.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Precondition(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 pairs, got {}", a.len())));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // relative to the data scale, a spread this small is rounding noise
    let zero = |ss: f64, m: f64| ss <= (1e-12 * m.abs().max(1e-300)).powi(2) * n;
    if saa == 0.0 || zero(saa, ma) {
        return Err(Error::UndefinedCorrelation("first series has zero variance".into()));
    }
    if sbb == 0.0 || zero(sbb, mb) {
        return Err(Error::UndefinedCorrelation("second series has zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation outcome: a value, or the reason none exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Correlation {
    Defined(f64),
    Undefined { undefined: String },
}

impl Correlation {
    pub fn value(&self) -> Option<f64> {
        match self {
            Correlation::Defined(r) => Some(*r),
            Correlation::Undefined { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pearson_r: Correlation,
    pub rmse_bpm: f64,
    pub mean_abs_err_bpm: f64,
    pub n_samples: usize,
    /// Grid points dropped because the estimate had zero confidence.
    pub n_excluded: usize,
    pub duration: f64,
    /// Time shift applied to the estimate, seconds.
    pub lag_s: f64,
}

impl ValidationReport {
    /// Flat `key=value` rendering, one field per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        match &self.pearson_r {
            Correlation::Defined(r) => writeln!(out, "pearson_r={r:.6}").unwrap(),
            Correlation::Undefined { undefined } => {
                writeln!(out, "pearson_r=undefined ({undefined})").unwrap()
            }
        }
        writeln!(out, "rmse_bpm={:.6}", self.rmse_bpm).unwrap();
        writeln!(out, "mean_abs_err_bpm={:.6}", self.mean_abs_err_bpm).unwrap();
        writeln!(out, "n_samples={}", self.n_samples).unwrap();
        writeln!(out, "n_excluded={}", self.n_excluded).unwrap();
        writeln!(out, "duration={:.3}", self.duration).unwrap();
        writeln!(out, "lag_s={:.3}", self.lag_s).unwrap();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Search estimate shifts in [-max_lag, max_lag] for the best r.
    pub max_lag: Option<f64>,
    pub lag_step: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { max_lag: None, lag_step: 0.1 }
    }
}

/// Resamples both series onto a shared 1 Hz grid over their overlap and
/// reports agreement. Grid points where the estimate has zero confidence
/// are excluded and counted.
pub fn align_and_compare(est: &HrTrace, truth: &HrTrace) -> Result<ValidationReport> {
    align_and_compare_with(est, truth, &CompareOptions::default())
}

pub fn align_and_compare_with(
    est: &HrTrace,
    truth: &HrTrace,
    options: &CompareOptions,
) -> Result<ValidationReport> {
    let Some(max_lag) = options.max_lag.filter(|l| *l > 0.0) else {
        return compare_at_lag(est, truth, 0.0);
    };
    if !(options.lag_step > 0.0) {
        return Err(Error::Config("lag step must be positive".into()));
    }
    let steps = (max_lag / options.lag_step).floor() as i64;
    let mut best: Option<ValidationReport> = None;
    for k in -steps..=steps {
        let lag = k as f64 * options.lag_step;
        let Ok(report) = compare_at_lag(est, truth, lag) else { continue };
        let better = match (&best, report.pearson_r.value()) {
            (None, _) => true,
            (Some(b), Some(r)) => b.pearson_r.value().is_none_or(|br| r > br),
            (Some(_), None) => false,
        };
        if better {
            best = Some(report);
        }
    }
    match best {
        Some(report) => Ok(report),
        None => compare_at_lag(est, truth, 0.0),
    }
}

fn compare_at_lag(est: &HrTrace, truth: &HrTrace, lag: f64) -> Result<ValidationReport> {
    let (Some(es), Some(ee), Some(ts), Some(te)) = (est.start(), est.end(), truth.start(), truth.end())
    else {
        return Err(Error::InsufficientOverlap("empty series".into()));
    };
    let lo = (es + lag).max(ts);
    let hi = (ee + lag).min(te);
    if !(hi - lo >= MIN_OVERLAP_S - 1e-9) {
        return Err(Error::InsufficientOverlap(format!(
            "series overlap {:.3} s, need {MIN_OVERLAP_S} s",
            (hi - lo).max(0.0)
        )));
    }
    let n_grid = ((hi - lo) / GRID_STEP_S + 1e-9).floor() as usize + 1;
    let mut e = Vec::with_capacity(n_grid);
    let mut g = Vec::with_capacity(n_grid);
    let mut excluded = 0;
    for i in 0..n_grid {
        let t = lo + i as f64 * GRID_STEP_S;
        let (Some((eb, ec)), Some((tb, _))) = (est.interpolate(t - lag), truth.interpolate(t)) else {
            continue;
        };
        if ec == 0.0 {
            excluded += 1;
            continue;
        }
        e.push(eb);
        g.push(tb);
    }
    if e.is_empty() {
        return Err(Error::InsufficientData(
            "every grid point was excluded for zero confidence".into(),
        ));
    }
    let n = e.len() as f64;
    let sq = e.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let abs = e.iter().zip(&g).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let rmse = sq.sqrt();
    let pearson_r = match pearson(&e, &g) {
        Ok(r) => Correlation::Defined(r),
        Err(Error::UndefinedCorrelation(msg)) => Correlation::Undefined {
            undefined: msg.replace("first series", "estimate").replace("second series", "truth"),
        },
        Err(Error::InsufficientData(msg)) => Correlation::Undefined { undefined: msg },
        Err(other) => return Err(other),
    };
    let report = ValidationReport {
        pearson_r,
        // RMSE dominates MAE (power-mean inequality); absorb last-bit rounding
        rmse_bpm: rmse.max(abs),
        mean_abs_err_bpm: abs,
        n_samples: e.len(),
        n_excluded: excluded,
        duration: hi - lo,
        lag_s: lag,
    };
    assert!(report.rmse_bpm >= report.mean_abs_err_bpm && report.mean_abs_err_bpm >= 0.0);
    Ok(report)
}
