use pulseplay_core::hr::baseline::{fft_hr_baseline_with, BaselineConfig};
use pulseplay_core::hr::{estimate_hr, EstimatorConfig, HrTrace};
use pulseplay_core::signal::{synth_ppg, SynthSpec};
use pulseplay_core::validation::align_and_compare;

fn noisy(spec: SynthSpec) -> SynthSpec {
    SynthSpec { noise_sigma: SynthSpec::noise_sigma_for_snr_db(10.0), ..spec }
}

#[test]
fn constant_rate_mean_within_two_bpm() {
    for seed in 0..10 {
        let spec = noisy(SynthSpec { seed, ..Default::default() });
        let (trace, _) = synth_ppg(&spec).unwrap();
        let hr = estimate_hr(&trace, &EstimatorConfig::default()).unwrap();
        let mean = hr.mean_bpm().unwrap();
        println!("seed {seed}: mean {mean:.3} n {}", hr.len());
        assert!((mean - 72.0).abs() <= 2.0, "seed {seed}: {mean}");
    }
}

#[test]
fn breathing_modulation_tracks_truth() {
    for seed in 0..10 {
        let spec = noisy(SynthSpec {
            base_bpm: 70.0,
            modulation_bpm: 8.0,
            modulation_freq: 0.1,
            duration: 120.0,
            seed,
            ..Default::default()
        });
        let (trace, truth) = synth_ppg(&spec).unwrap();
        let hr = estimate_hr(&trace, &EstimatorConfig::default()).unwrap();
        let report = align_and_compare(&hr, &truth).unwrap();
        println!("seed {seed}: {}", report.to_key_value().replace('\n', " "));
        assert!(report.pearson_r.value().unwrap() >= 0.8, "seed {seed}");
    }
}

fn agreement(cwt: &HrTrace, fft: &HrTrace) -> (usize, usize) {
    let mut hits = 0;
    let mut total = 0;
    for s in fft.samples() {
        if let Some((bpm, _)) = cwt.interpolate(s.t) {
            total += 1;
            if (bpm - s.bpm).abs() <= 3.0 {
                hits += 1;
            }
        }
    }
    (hits, total)
}

#[test]
fn dual_estimator_battery() {
    let mut hits = 0;
    let mut total = 0;
    for k in 0..20u64 {
        let spec = noisy(SynthSpec {
            base_bpm: 50.0 + 6.0 * k as f64,
            modulation_bpm: (k % 5) as f64,
            modulation_freq: 0.02 + 0.0015 * (k % 7) as f64 * 2.0,
            duration: 90.0,
            seed: 100 + k,
            ..Default::default()
        });
        let (trace, _) = synth_ppg(&spec).unwrap();
        let cwt = estimate_hr(&trace, &EstimatorConfig::default()).unwrap();
        let fft = fft_hr_baseline_with(&trace, &BaselineConfig { window: 12.0, ..Default::default() }).unwrap();
        let (h, t) = agreement(&cwt, &fft);
        println!("spec {k} base {}: {h}/{t}", spec.base_bpm);
        hits += h;
        total += t;
    }
    let share = hits as f64 / total as f64;
    println!("agreement {share:.4}");
    assert!(share >= 0.95, "{share}");
}
