use std::path::{Path, PathBuf};

use pulseplay_core::session::N_SEATS;
use pulseplay_core::signal::Channel;
use pulseplay_core::{EstimatorConfig, Error, Result, SynthSpec};
use serde::Deserialize;

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_cadence() -> f64 {
    20.0
}

fn default_groups() -> usize {
    6
}

fn default_speed() -> f64 {
    1.0
}

fn default_fps() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// WebSocket listen address.
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Optional raw TCP listen address.
    #[serde(default)]
    pub tcp_listen: Option<String>,
    pub operator_token: String,
    /// Index into the condition schedule.
    #[serde(default)]
    pub group: usize,
    #[serde(default = "default_groups")]
    pub n_groups: usize,
    /// State broadcasts per second.
    #[serde(default = "default_cadence")]
    pub cadence_hz: f64,
    /// Replay speed of recorded and synthetic sources; 1 is real time.
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub seats: Vec<SeatConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeatConfig {
    pub name: String,
    pub source: SourceConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Synthetic(SynthSpec),
    TraceCsv {
        path: PathBuf,
    },
    Frames {
        dir: PathBuf,
        roi: PathBuf,
        #[serde(default = "default_fps")]
        fps: f64,
        #[serde(default)]
        channel: Channel,
    },
    /// Concatenated PPM frames on a pipe or file.
    PpmStream {
        path: PathBuf,
        roi: PathBuf,
        #[serde(default = "default_fps")]
        fps: f64,
        #[serde(default)]
        channel: Channel,
    },
}

impl SourceConfig {
    pub fn describe(&self) -> String {
        match self {
            SourceConfig::Synthetic(s) => format!("synthetic {} BPM seed {}", s.base_bpm, s.seed),
            SourceConfig::TraceCsv { path } => format!("trace {}", path.display()),
            SourceConfig::Frames { dir, .. } => format!("frames {}", dir.display()),
            SourceConfig::PpmStream { path, .. } => format!("ppm stream {}", path.display()),
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            SourceConfig::Synthetic(_) => {}
            SourceConfig::TraceCsv { path } => fix(path),
            SourceConfig::Frames { dir, roi, .. } => {
                fix(dir);
                fix(roi);
            }
            SourceConfig::PpmStream { path, roi, .. } => {
                fix(path);
                fix(roi);
            }
        }
    }

    /// Fails when the source cannot be reached.
    pub fn check(&self) -> Result<()> {
        let missing = |what: &str, p: &Path| Err(Error::Config(format!("{what} {} not found", p.display())));
        match self {
            SourceConfig::Synthetic(spec) => spec.validate(),
            SourceConfig::TraceCsv { path } if !path.is_file() => missing("trace file", path),
            SourceConfig::Frames { dir, .. } if !dir.is_dir() => missing("frame directory", dir),
            SourceConfig::Frames { roi, .. } | SourceConfig::PpmStream { roi, .. } if !roi.is_file() => {
                missing("ROI sidecar", roi)
            }
            SourceConfig::PpmStream { path, .. } if !path.exists() => missing("frame stream", path),
            _ => Ok(()),
        }
    }
}

impl SessionConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("session config: {}", e.message())))
    }

    /// Reads, resolves relative source paths against the file's directory
    /// and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("session config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for seat in &mut config.seats {
            seat.source.resolve(base);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seats.len() != N_SEATS {
            return Err(Error::Config(format!(
                "a session needs exactly {N_SEATS} seats, config has {}",
                self.seats.len()
            )));
        }
        if self.operator_token.trim().is_empty() {
            return Err(Error::Config("operator_token must not be empty".into()));
        }
        if !(self.cadence_hz > 0.0 && self.cadence_hz <= 1000.0) {
            return Err(Error::Config(format!("cadence_hz must be in (0, 1000], got {}", self.cadence_hz)));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::Config(format!("speed must be positive, got {}", self.speed)));
        }
        if self.group >= self.n_groups {
            return Err(Error::Config(format!("group {} outside 0..{}", self.group, self.n_groups)));
        }
        self.estimator.validate()?;
        for (i, seat) in self.seats.iter().enumerate() {
            if seat.name.trim().is_empty() {
                return Err(Error::Config(format!("seat {i} has an empty name")));
            }
            seat.source.check().map_err(|e| Error::Config(format!("seat {i}: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"
operator_token = "t"
cadence_hz = 10
[[seats]]
name = "Ana"
source = { kind = "synthetic", base_bpm = 70.0, seed = 1 }
[[seats]]
name = "Ben"
source = { kind = "synthetic", base_bpm = 80.0 }
[[seats]]
name = "Cy"
source = { kind = "synthetic" }
"#;

    #[test]
    fn parses_defaults() {
        let c = SessionConfig::parse(THREE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.listen, "127.0.0.1:8080");
        assert_eq!(c.cadence_hz, 10.0);
        assert_eq!(c.n_groups, 6);
        assert_eq!(c.estimator, EstimatorConfig::default());
        match &c.seats[1].source {
            SourceConfig::Synthetic(s) => assert_eq!((s.base_bpm, s.fs), (80.0, 30.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_seats_rejected() {
        let text = THREE.rsplit_once("[[seats]]").unwrap().0;
        let err = SessionConfig::parse(text).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("exactly 3")), "{err}");
    }

    #[test]
    fn missing_sources_rejected() {
        let text = THREE.replacen(r#"{ kind = "synthetic" }"#, r#"{ kind = "trace_csv", path = "/no/such.csv" }"#, 1);
        let err = SessionConfig::parse(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("seat 2"), "{err}");
        let bad_spec = THREE.replacen("base_bpm = 80.0", "base_bpm = 250.0", 1);
        assert!(SessionConfig::parse(&bad_spec).unwrap().validate().is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(SessionConfig::parse(&format!("colour = 1\n{THREE}")).is_err());
        let typo = THREE.replacen("seed = 1", "sed = 1", 1);
        assert!(SessionConfig::parse(&typo).is_err());
    }

    #[test]
    fn shipped_example_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("session.example.toml");
        let c = SessionConfig::load(&path).unwrap();
        assert_eq!(c.tcp_listen.as_deref(), Some("127.0.0.1:8081"));
        assert_eq!(c.estimator.n_scales, 64);
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let mut s = SourceConfig::TraceCsv { path: "a.csv".into() };
        s.resolve(Path::new("/tmp/cfg"));
        assert_eq!(s, SourceConfig::TraceCsv { path: "/tmp/cfg/a.csv".into() });
    }
}
