//! Signal ingestion and conditioning.

pub mod frame;
pub mod synth;
pub mod trace;

pub use frame::{mean_channel, parse_frame, parse_frame_prefix, read_frame, Channel, Frame, Roi};
pub use synth::{beat_times, synth_ppg, SynthSpec, SynthStream};
pub use trace::{detrend, resample_uniform, Sample, Trace};
