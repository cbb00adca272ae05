//! One thread per seat: read samples, pace them, run the streaming
//! estimator, forward heart-rate samples to the session.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use pulseplay_core::io::{open, read_trace_csv};
use pulseplay_core::session::SeatId;
use pulseplay_core::signal::{read_frame, Sample, SynthStream};
use pulseplay_core::{EstimatorConfig, HrSample, Result, StreamingEstimator};
use tokio::sync::mpsc;

use super::config::SourceConfig;
use crate::frames::{list_frames, read_frame_file, FrameSampler};

/// Longest single sleep, so a stop request is noticed promptly.
const MAX_NAP: Duration = Duration::from_millis(50);

/// Estimator timing for one seat.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatencyStats {
    pub samples: u64,
    pub windows: u64,
    /// Longest push that completed a window, seconds.
    pub max_window_s: f64,
    /// Sum over pushes that completed a window, seconds.
    pub total_window_s: f64,
}

impl LatencyStats {
    fn absorb(&mut self, other: &LatencyStats) {
        self.samples += other.samples;
        self.windows += other.windows;
        self.max_window_s = self.max_window_s.max(other.max_window_s);
        self.total_window_s += other.total_window_s;
    }

    pub fn mean_window_s(&self) -> f64 {
        if self.windows == 0 {
            0.0
        } else {
            self.total_window_s / self.windows as f64
        }
    }
}

enum SampleSource {
    Synthetic(SynthStream),
    Trace(std::vec::IntoIter<Sample>),
    Frames { files: std::vec::IntoIter<PathBuf>, sampler: FrameSampler },
    Stream { reader: BufReader<File>, sampler: FrameSampler },
}

impl SampleSource {
    fn open(config: &SourceConfig, fs: f64) -> Result<Self> {
        Ok(match config {
            SourceConfig::Synthetic(spec) => SampleSource::Synthetic(SynthStream::new(spec)?),
            SourceConfig::TraceCsv { path } => {
                let trace = read_trace_csv(open(path)?, &path.display().to_string(), fs)?;
                SampleSource::Trace(trace.samples().to_vec().into_iter())
            }
            SourceConfig::Frames { dir, roi, fps, channel } => SampleSource::Frames {
                files: list_frames(dir)?.into_iter(),
                sampler: FrameSampler::from_sidecar(roi, *fps, *channel)?,
            },
            SourceConfig::PpmStream { path, roi, fps, channel } => SampleSource::Stream {
                reader: BufReader::new(File::open(path)?),
                sampler: FrameSampler::from_sidecar(roi, *fps, *channel)?,
            },
        })
    }

    fn next(&mut self) -> Result<Option<Sample>> {
        match self {
            SampleSource::Synthetic(s) => Ok(s.next()),
            SampleSource::Trace(it) => Ok(it.next()),
            SampleSource::Frames { files, sampler } => match files.next() {
                Some(p) => Ok(Some(sampler.next_sample(&read_frame_file(&p)?)?)),
                None => Ok(None),
            },
            SampleSource::Stream { reader, sampler } => match read_frame(reader)? {
                Some(f) => Ok(Some(sampler.next_sample(&f)?)),
                None => Ok(None),
            },
        }
    }
}

pub struct SeatWorker {
    pub seat: SeatId,
    pub stats: Arc<Mutex<LatencyStats>>,
    handle: JoinHandle<()>,
}

impl SeatWorker {
    /// Opens the source now so bad inputs fail at startup, then runs the
    /// seat on its own thread.
    pub fn spawn(
        seat: SeatId,
        source: &SourceConfig,
        estimator: EstimatorConfig,
        speed: f64,
        out: mpsc::Sender<(SeatId, HrSample)>,
        stop: Arc<AtomicBool>,
    ) -> Result<Self> {
        let src = SampleSource::open(source, estimator.fs)?;
        let est = StreamingEstimator::new(estimator)?;
        let stats = Arc::new(Mutex::new(LatencyStats::default()));
        let shared = Arc::clone(&stats);
        let handle = std::thread::Builder::new()
            .name(format!("seat-{seat}"))
            .spawn(move || run(seat, src, est, speed, out, stop, shared))?;
        Ok(SeatWorker { seat, stats, handle })
    }

    pub fn join(self) {
        if self.handle.join().is_err() {
            tracing::error!(seat = self.seat, "seat thread panicked");
        }
    }
}

fn run(
    seat: SeatId,
    mut src: SampleSource,
    mut est: StreamingEstimator,
    speed: f64,
    out: mpsc::Sender<(SeatId, HrSample)>,
    stop: Arc<AtomicBool>,
    stats: Arc<Mutex<LatencyStats>>,
) {
    let start = Instant::now();
    let mut t_first = None;
    let mut last_log = Instant::now();
    let mut window = LatencyStats::default();
    while !stop.load(Ordering::Relaxed) {
        let sample = match src.next() {
            Ok(Some(s)) => s,
            Ok(None) => {
                tracing::info!(seat, "source exhausted");
                break;
            }
            Err(e) => {
                tracing::error!(seat, error = %e, "source failed");
                break;
            }
        };
        let t0 = *t_first.get_or_insert(sample.t);
        let due = start + Duration::from_secs_f64(((sample.t - t0) / speed).max(0.0));
        if !sleep_until(due, &stop) {
            break;
        }

        let before = Instant::now();
        // Seat times start at zero, like the session clock.
        let produced = match est.push(sample.t - t0, sample.v) {
            Ok(p) => p,
            Err(e) => {
                tracing::warn!(seat, error = %e, "sample rejected");
                continue;
            }
        };
        let elapsed = before.elapsed().as_secs_f64();
        window.samples += 1;
        if !produced.is_empty() {
            window.windows += 1;
            window.max_window_s = window.max_window_s.max(elapsed);
            window.total_window_s += elapsed;
        }
        for hr in produced {
            if out.blocking_send((seat, hr)).is_err() {
                return;
            }
        }

        if last_log.elapsed() >= Duration::from_secs(1) {
            let mut total = stats.lock().expect("stats lock");
            total.absorb(&window);
            tracing::info!(
                seat,
                windows = total.windows,
                max_ms = window.max_window_s * 1e3,
                mean_ms = window.mean_window_s() * 1e3,
                "estimator latency"
            );
            window = LatencyStats::default();
            last_log = Instant::now();
        }
    }
    stats.lock().expect("stats lock").absorb(&window);
}

/// False when stopped before `due`.
fn sleep_until(due: Instant, stop: &AtomicBool) -> bool {
    loop {
        if stop.load(Ordering::Relaxed) {
            return false;
        }
        let now = Instant::now();
        if now >= due {
            return true;
        }
        std::thread::sleep((due - now).min(MAX_NAP));
    }
}
