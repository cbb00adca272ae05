//! Ridge extraction: per-column peak frequency of the scalogram.

use super::cwt::Scalogram;
use super::{HrSample, HrTrace};
use crate::error::Result;

/// Median smoothing span applied to the raw ridge, in seconds.
pub const RIDGE_SMOOTHING_S: f64 = 2.0;

pub fn extract_ridge(scalogram: &Scalogram) -> Result<HrTrace> {
    extract_ridge_with(scalogram, RIDGE_SMOOTHING_S)
}

/// Per column: heart rate from the peak of scale-rectified power (power x
/// frequency, which removes the low-frequency bias of L2-normalised Morlet
/// power), refined by a log-domain parabola through the neighbouring cells.
/// Confidence is the peak share of column power, rescaled so that a flat
/// column scores 0 and a single-cell column scores 1, and zeroed for columns
/// entirely inside the cone of influence.
pub fn extract_ridge_with(scalogram: &Scalogram, smoothing_s: f64) -> Result<HrTrace> {
    let freqs = scalogram.freqs();
    let n_f = freqs.len();
    let f_lo = freqs[0];
    let f_hi = freqs[n_f - 1];
    let mut previous = 60.0 * (f_lo + f_hi) / 2.0;

    let mut raw = Vec::with_capacity(scalogram.n_times());
    let mut confidence = Vec::with_capacity(scalogram.n_times());
    for ti in 0..scalogram.n_times() {
        let col = scalogram.column(ti);
        let total: f64 = col.iter().sum();
        if total <= 0.0 {
            raw.push(previous);
            confidence.push(0.0);
            continue;
        }
        let rectified = |i: usize| col[i] * freqs[i];
        let peak = (0..n_f)
            .max_by(|&a, &b| rectified(a).total_cmp(&rectified(b)))
            .unwrap_or(0);
        let f = refine_peak(&freqs, peak, rectified);
        let bpm = (60.0 * f).clamp(60.0 * f_lo, 60.0 * f_hi);
        previous = bpm;
        raw.push(bpm);

        let share = col[peak] / total;
        let floor = 1.0 / n_f as f64;
        let mut c = if n_f > 1 { ((share - floor) / (1.0 - floor)).clamp(0.0, 1.0) } else { 1.0 };
        if scalogram.column_in_coi(ti) {
            c = 0.0;
        }
        confidence.push(c);
    }

    let times = scalogram.times();
    let fs = if times.len() > 1 {
        (times.len() - 1) as f64 / (times[times.len() - 1] - times[0])
    } else {
        1.0
    };
    let half = ((smoothing_s * fs) / 2.0).round() as usize;
    let smoothed = median_filter(&raw, half);

    HrTrace::new(
        times
            .iter()
            .zip(smoothed)
            .zip(confidence)
            .map(|((&t, bpm), confidence)| HrSample { t, bpm, confidence })
            .collect(),
    )
}

fn refine_peak(freqs: &[f64], peak: usize, value: impl Fn(usize) -> f64) -> f64 {
    if peak == 0 || peak + 1 == freqs.len() {
        return freqs[peak];
    }
    let (l, c, r) = (value(peak - 1), value(peak), value(peak + 1));
    if l <= 0.0 || r <= 0.0 {
        return freqs[peak];
    }
    let (l, c, r) = (l.ln(), c.ln(), r.ln());
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return freqs[peak];
    }
    let delta = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
    let (lf, cf, rf) = (freqs[peak - 1].ln(), freqs[peak].ln(), freqs[peak + 1].ln());
    let log_f = if delta >= 0.0 { cf + delta * (rf - cf) } else { cf + delta * (cf - lf) };
    log_f.exp()
}

/// Centered running median with truncated windows at the edges.
pub(crate) fn median_filter(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    let mut window = Vec::with_capacity(2 * half + 1);
    (0..n)
        .map(|i| {
            window.clear();
            window.extend_from_slice(&values[i.saturating_sub(half)..(i + half + 1).min(n)]);
            window.sort_by(f64::total_cmp);
            let m = window.len();
            if m % 2 == 1 {
                window[m / 2]
            } else {
                0.5 * (window[m / 2 - 1] + window[m / 2])
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hr::cwt::{morlet_cwt, scales_for_band};
    use crate::hr::CardiacBand;
    use crate::signal::Trace;
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_at_72_bpm() {
        let fs = 30.0;
        let values: Vec<f64> = (0..1800).map(|i| (2.0 * PI * 1.2 * i as f64 / fs).sin()).collect();
        let tr = Trace::from_uniform(0.0, fs, &values).unwrap();
        let scales = scales_for_band(&CardiacBand::default(), 64).unwrap();
        let sc = morlet_cwt(&tr, &scales).unwrap();
        let step = scales[1].freq / scales[0].freq;
        let hr = extract_ridge(&sc).unwrap();
        for (ti, s) in hr.samples().iter().enumerate() {
            if (0..sc.n_freqs()).any(|fi| sc.in_coi(ti, fi)) {
                continue;
            }
            assert!(s.bpm < 72.0 * step && s.bpm > 72.0 / step, "t {} bpm {}", s.t, s.bpm);
            assert!(s.confidence > 0.0);
        }
    }

    #[test]
    fn all_zero_scalogram_falls_back_to_midpoint() {
        let scales = scales_for_band(&CardiacBand::default(), 16).unwrap();
        let freqs: Vec<f64> = scales.iter().map(|w| w.freq).collect();
        let times: Vec<f64> = (0..90).map(|i| i as f64 / 30.0).collect();
        let sc = Scalogram::new(times, &freqs, vec![0.0; 90 * 16]).unwrap();
        let hr = extract_ridge(&sc).unwrap();
        for s in hr.samples() {
            assert_eq!(s.confidence, 0.0);
            assert!((s.bpm - 120.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_column_carries_previous_rate() {
        let freqs = [1.0, 1.5, 2.0];
        let mut power = vec![0.0; 3 * 3];
        power[1] = 5.0; // column 0 peaks at 1.5 Hz
        let sc = Scalogram::new(vec![0.0, 1.0, 2.0], &freqs, power).unwrap();
        let hr = extract_ridge_with(&sc, 0.0).unwrap();
        assert_eq!(hr.samples()[1].bpm, 90.0);
        assert_eq!(hr.samples()[1].confidence, 0.0);
    }

    #[test]
    fn impulse_column() {
        let freqs = [1.0, 1.5, 2.0];
        let sc = Scalogram::new(vec![10.0], &freqs, vec![0.0, 3.0, 0.0]).unwrap();
        let hr = extract_ridge(&sc).unwrap();
        assert_eq!(hr.samples()[0].bpm, 90.0);
    }

    #[test]
    fn median_filter_edges() {
        assert_eq!(median_filter(&[1.0, 5.0, 2.0, 8.0], 1), vec![3.0, 2.0, 5.0, 5.0]);
        assert_eq!(median_filter(&[4.0], 3), vec![4.0]);
    }

    #[test]
    fn refine_is_exact_for_log_parabola() {
        // power that is an exact parabola in log-power vs log-frequency
        let freqs: Vec<f64> = (0..10).map(|i| 1.0 * 1.1f64.powi(i)).collect();
        let centre = 1.0 * 1.1f64.powf(4.3);
        let val = |i: usize| (-(freqs[i].ln() - centre.ln()).powi(2) * 40.0).exp();
        let got = refine_peak(&freqs, 4, val);
        assert!((got / centre - 1.0).abs() < 1e-9, "{got} vs {centre}");
    }
}
