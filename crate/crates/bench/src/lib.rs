//! Shared fixtures for the benchmarks.

use pulseplay_core::{synth_ppg, SynthSpec, Trace};

/// Noisy synthetic trace at 30 Hz with breathing modulation.
pub fn fixture_trace(seconds: f64) -> Trace {
    let spec = SynthSpec {
        duration: seconds,
        base_bpm: 72.0,
        modulation_bpm: 6.0,
        noise_sigma: SynthSpec::noise_sigma_for_snr_db(10.0),
        seed: 42,
        ..SynthSpec::default()
    };
    synth_ppg(&spec).expect("valid fixture spec").0
}
