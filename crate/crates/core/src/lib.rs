//! Remote photoplethysmography engine and biofeedback session model.

pub mod analytics;
pub mod error;
pub mod hr;
pub mod io;
pub mod session;
pub mod signal;
pub mod validation;

pub use analytics::{condition_report, ConditionReport, SpgqMapping, SpgqResponse, Subscale, SubscaleScores, TestResult};
pub use error::{Error, Result};
pub use hr::{estimate_hr, fft_hr_baseline, CardiacBand, EstimatorConfig, HrSample, HrTrace, StreamingEstimator};
pub use session::{Condition, SessionState};
pub use signal::{synth_ppg, Channel, Frame, Roi, SynthSpec, Trace};
pub use validation::{align_and_compare, ValidationReport};
