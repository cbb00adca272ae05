//! Batch subcommands. Each validates its paths first, computes, then writes
//! outputs atomically.

use std::fmt;
use std::path::Path;

use pulseplay_core::analytics::{condition_report, ConditionReport, SpgqMapping};
use pulseplay_core::io::{
    open, read_beats_csv, read_hr_csv, read_mapping_csv, read_responses_csv, read_trace_csv, write_beats_csv,
    write_hr_csv, write_trace_csv,
};
use pulseplay_core::signal::beat_times;
use pulseplay_core::validation::{align_and_compare_with, rr_to_hr, CompareOptions, ValidationReport};
use pulseplay_core::{estimate_hr, synth_ppg, Error, HrTrace, Result};
use serde::Serialize;

use crate::args::{AnalyzeArgs, EstimateArgs, SimulateArgs, ValidateArgs};
use crate::atomic::{check_input_file, check_output_path, write_atomic};
use crate::frames::trace_from_frames;

/// Samples below this confidence count as low-confidence in summaries.
pub const LOW_CONFIDENCE: f64 = 0.5;

/// Rate used to turn beat times into a reference heart-rate series.
const BEATS_HR_FS: f64 = 4.0;

fn name(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSummary {
    pub mean_bpm: f64,
    pub n_samples: usize,
    pub low_confidence_pct: f64,
}

impl EstimateSummary {
    pub fn of(hr: &HrTrace) -> Self {
        let n = hr.len();
        let low = hr.samples().iter().filter(|s| s.confidence < LOW_CONFIDENCE).count();
        EstimateSummary {
            mean_bpm: hr.mean_bpm().unwrap_or(f64::NAN),
            n_samples: n,
            low_confidence_pct: if n == 0 { 0.0 } else { 100.0 * low as f64 / n as f64 },
        }
    }
}

impl fmt::Display for EstimateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mean_bpm={:.2} samples={} low_confidence={:.1}%",
            self.mean_bpm, self.n_samples, self.low_confidence_pct
        )
    }
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<EstimateSummary> {
    let config = args.estimator.config()?;
    check_output_path(&args.out)?;
    let trace = match (&args.trace, &args.frames, &args.roi) {
        (Some(path), _, _) => {
            check_input_file(path)?;
            read_trace_csv(open(path)?, &name(path), config.fs)?
        }
        (None, Some(dir), Some(roi)) => {
            check_input_file(roi)?;
            if !dir.is_dir() {
                return Err(Error::Io(format!("frame directory {} not found", dir.display())));
            }
            trace_from_frames(dir, roi, args.fps, args.channel)?
        }
        _ => return Err(Error::Config("give --trace, or --frames with --roi".into())),
    };
    let hr = estimate_hr(&trace, &config)?;
    write_atomic(&args.out, |w| write_hr_csv(w, &hr))?;
    Ok(EstimateSummary::of(&hr))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = args.spec();
    spec.validate()?;
    check_output_path(&args.trace_out)?;
    check_output_path(&args.truth_out)?;
    if let Some(p) = &args.beats_out {
        check_output_path(p)?;
    }
    let (trace, truth) = synth_ppg(&spec)?;
    write_atomic(&args.trace_out, |w| write_trace_csv(w, &trace))?;
    write_atomic(&args.truth_out, |w| write_hr_csv(w, &truth))?;
    if let Some(p) = &args.beats_out {
        let beats = beat_times(&spec)?;
        write_atomic(p, |w| write_beats_csv(w, &beats))?;
    }
    Ok(())
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidationReport> {
    check_input_file(&args.est)?;
    check_output_path(&args.out)?;
    let truth = match (&args.truth, &args.beats) {
        (Some(p), _) => {
            check_input_file(p)?;
            read_hr_csv(open(p)?, &name(p))?
        }
        (None, Some(p)) => {
            check_input_file(p)?;
            rr_to_hr(&read_beats_csv(open(p)?, &name(p))?, BEATS_HR_FS)?
        }
        (None, None) => return Err(Error::Config("give --truth or --beats".into())),
    };
    let est = read_hr_csv(open(&args.est)?, &name(&args.est))?;
    let options = CompareOptions { max_lag: args.max_lag, ..CompareOptions::default() };
    let report = align_and_compare_with(&est, &truth, &options)?;
    write_json(&args.out, &report)?;
    Ok(report)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<ConditionReport> {
    check_input_file(&args.responses)?;
    check_output_path(&args.out)?;
    let mapping = match &args.mapping {
        Some(p) => {
            check_input_file(p)?;
            read_mapping_csv(open(p)?, &name(p))?
        }
        None => SpgqMapping::placeholder(),
    };
    let responses = read_responses_csv(open(&args.responses)?, &name(&args.responses))?;
    let report = condition_report(&responses, &mapping)?;
    write_json(&args.out, &report)?;
    Ok(report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    })
}
