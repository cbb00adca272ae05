//! Frame-sequence input: PPM files or a concatenated PPM stream, averaged
//! over per-frame ROIs.

use std::path::{Path, PathBuf};

use pulseplay_core::io::{open, read_roi_csv, RoiTrack};
use pulseplay_core::signal::{mean_channel, parse_frame, Channel, Frame, Sample};
use pulseplay_core::{Error, Result, Trace};

/// Timestamp of frame `i`: whole milliseconds, so frame input and a trace
/// CSV written from the same values carry identical times.
pub fn frame_time(i: usize, fps: f64) -> f64 {
    (i as f64 * 1000.0 / fps).round() / 1000.0
}

/// Turns successive frames into trace samples.
#[derive(Debug, Clone)]
pub struct FrameSampler {
    rois: RoiTrack,
    fps: f64,
    channel: Channel,
    index: usize,
}

impl FrameSampler {
    pub fn new(rois: RoiTrack, fps: f64, channel: Channel) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        Ok(FrameSampler { rois, fps, channel, index: 0 })
    }

    pub fn from_sidecar(roi_path: &Path, fps: f64, channel: Channel) -> Result<Self> {
        let rois = read_roi_csv(open(roi_path)?, &roi_path.display().to_string())?;
        Self::new(rois, fps, channel)
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn next_sample(&mut self, frame: &Frame) -> Result<Sample> {
        let roi = self.rois.roi_for(self.index)?;
        let v = mean_channel(frame, &roi, self.channel)
            .map_err(|e| Error::Bounds(format!("frame {}: {e}", self.index)))?;
        let t = frame_time(self.index, self.fps);
        self.index += 1;
        Ok(Sample { t, v })
    }
}

/// `*.ppm` files of `dir` in file-name order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::Io(e.to_string()))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("ppm")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::InsufficientData(format!("no .ppm frames in {}", dir.display())));
    }
    Ok(files)
}

pub fn read_frame_file(path: &Path) -> Result<Frame> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_frame(&bytes).map_err(|e| e.in_source(&path.display().to_string()))
}

/// Trace of ROI means over a directory of frames.
pub fn trace_from_frames(dir: &Path, roi_path: &Path, fps: f64, channel: Channel) -> Result<Trace> {
    let mut sampler = FrameSampler::from_sidecar(roi_path, fps, channel)?;
    let mut samples = Vec::new();
    for path in list_frames(dir)? {
        samples.push(sampler.next_sample(&read_frame_file(&path)?)?);
    }
    Trace::new(samples, fps)
}
