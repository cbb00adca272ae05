use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use pulseplay_core::signal::Channel;
use pulseplay_core::{CardiacBand, EstimatorConfig, Result, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "pulseplay", version, about = "Remote PPG heart-rate pipeline and biofeedback session server")]
pub struct Cli {
    /// Log filter, e.g. `info` or `pulseplay_cli=debug`.
    #[arg(long, global = true, env = "PULSEPLAY_LOG", default_value = "info")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate instantaneous heart rate from a trace CSV or a PPM frame sequence.
    Estimate(EstimateArgs),
    /// Generate a synthetic trace with its ground-truth heart rate.
    Simulate(SimulateArgs),
    /// Compare an estimate against ground truth or ECG beat times.
    Validate(ValidateArgs),
    /// Run the live three-seat session server.
    Serve(ServeArgs),
    /// Score questionnaires and compare conditions.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Uniform analysis rate, Hz.
    #[arg(long, default_value_t = 30.0)]
    pub fs: f64,
    /// Lower band edge, Hz.
    #[arg(long, default_value_t = CardiacBand::default().f_min)]
    pub f_min: f64,
    /// Upper band edge, Hz.
    #[arg(long, default_value_t = CardiacBand::default().f_max)]
    pub f_max: f64,
    /// Number of wavelet scales.
    #[arg(long, default_value_t = 64)]
    pub scales: usize,
    /// Analysis window, seconds.
    #[arg(long, default_value_t = 20.0)]
    pub window: f64,
    /// Detrend moving-average span, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub detrend: f64,
}

impl EstimatorArgs {
    pub fn config(&self) -> Result<EstimatorConfig> {
        let config = EstimatorConfig {
            fs: self.fs,
            band: CardiacBand { f_min: self.f_min, f_max: self.f_max },
            n_scales: self.scales,
            window: self.window,
            detrend_window: self.detrend,
            ..EstimatorConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["trace", "frames"])))]
pub struct EstimateArgs {
    /// Trace CSV (`t_ms,value`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Directory of binary PPM frames, taken in file-name order.
    #[arg(long, requires = "roi")]
    pub frames: Option<PathBuf>,
    /// ROI sidecar CSV (`frame_index,x,y,w,h`) for frame input.
    #[arg(long, requires = "frames")]
    pub roi: Option<PathBuf>,
    /// Frame rate of the frame sequence.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Colour channel averaged over the ROI.
    #[arg(long, default_value_t = Channel::G)]
    pub channel: Channel,
    /// Heart-rate CSV to write (`t_ms,bpm,confidence`).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Seconds.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 30.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 72.0)]
    pub base_bpm: f64,
    /// Peak deviation of the breathing modulation, BPM.
    #[arg(long, default_value_t = 0.0)]
    pub mod_bpm: f64,
    /// Breathing modulation rate, Hz.
    #[arg(long, default_value_t = 0.1)]
    pub mod_freq: f64,
    /// White noise standard deviation against a unit pulse.
    #[arg(long, conflicts_with = "snr_db")]
    pub noise_sigma: Option<f64>,
    /// Signal-to-noise ratio in dB; sets the noise level.
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub drift_amp: f64,
    /// Hz.
    #[arg(long, default_value_t = 0.05)]
    pub drift_freq: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trace CSV to write.
    #[arg(long)]
    pub trace_out: PathBuf,
    /// Ground-truth heart-rate CSV to write.
    #[arg(long)]
    pub truth_out: PathBuf,
    /// Optional beat-time CSV (`beat_t_ms`) at pulse peaks.
    #[arg(long)]
    pub beats_out: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn spec(&self) -> SynthSpec {
        let noise_sigma = match (self.noise_sigma, self.snr_db) {
            (Some(s), _) => s,
            (None, Some(db)) => SynthSpec::noise_sigma_for_snr_db(db),
            (None, None) => 0.0,
        };
        SynthSpec {
            duration: self.duration,
            fs: self.fs,
            base_bpm: self.base_bpm,
            modulation_bpm: self.mod_bpm,
            modulation_freq: self.mod_freq,
            noise_sigma,
            baseline_drift_amp: self.drift_amp,
            baseline_drift_freq: self.drift_freq,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("reference").required(true).args(["truth", "beats"])))]
pub struct ValidateArgs {
    /// Estimated heart-rate CSV.
    #[arg(long)]
    pub est: PathBuf,
    /// Ground-truth heart-rate CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// ECG beat times CSV (`beat_t_ms`).
    #[arg(long)]
    pub beats: Option<PathBuf>,
    /// Search estimate shifts up to this many seconds for the best correlation.
    #[arg(long)]
    pub max_lag: Option<f64>,
    /// JSON report to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Session config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// WebSocket listen address, overriding the config.
    #[arg(long, env = "PULSEPLAY_LISTEN")]
    pub listen: Option<String>,
    /// Raw TCP listen address, overriding the config.
    #[arg(long, env = "PULSEPLAY_TCP_LISTEN")]
    pub tcp_listen: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Responses CSV (`group,participant,condition,item_1..item_21`).
    #[arg(long)]
    pub responses: PathBuf,
    /// Item mapping CSV (`item,subscale,reversed`). Without it a
    /// non-canonical placeholder mapping is used.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// JSON report to write.
    #[arg(long)]
    pub out: PathBuf,
}
