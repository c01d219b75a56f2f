//! Session configuration and the plain-text `key = value` config format.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Basis;
use crate::optics::OpticalSetup;
use crate::photonics::{DetectionModel, NoiseConfig, PulseConfig};
use crate::rng::SessionSeeds;

/// Detection model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "ideal")]
    Ideal,
    #[serde(rename = "optical")]
    Optical,
}

/// Everything a run needs, snapshot into every session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub dim: usize,
    pub model: Model,
    pub pulse: PulseConfig,
    pub noise: NoiseConfig,
    /// Required when `model` is `Optical`; ignored otherwise.
    pub optics: Option<OpticalSetup>,
    pub duration_cycles: u64,
    pub seeds: SessionSeeds,
    pub output_dir: Option<PathBuf>,
    /// Debug hook: pin Alice's choice to one (basis, state) for every cycle.
    pub force_alice: Option<(Basis, usize)>,
}

impl SessionConfig {
    /// Ideal-model config from a pulse preset; seeds must still be explicit.
    pub fn ideal(dim: usize, pulse: PulseConfig, duration_cycles: u64, seeds: SessionSeeds) -> Self {
        Self {
            dim,
            model: Model::Ideal,
            pulse,
            noise: NoiseConfig::none(),
            optics: None,
            duration_cycles,
            seeds,
            output_dir: None,
            force_alice: None,
        }
    }

    pub fn detection_model(&self) -> Result<DetectionModel> {
        match self.model {
            Model::Ideal => Ok(DetectionModel::Ideal),
            Model::Optical => {
                let setup = self
                    .optics
                    .clone()
                    .unwrap_or_else(|| OpticalSetup::default_for_dim(self.dim));
                Ok(DetectionModel::Optical(setup))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 16 {
            return Err(Error::ConfigGeneral(format!(
                "dim must be 2 or 16, got {}",
                self.dim
            )));
        }
        if self.duration_cycles == 0 {
            return Err(Error::ConfigGeneral("cycles must be >= 1".into()));
        }
        self.pulse.validate()?;
        self.noise.validate()?;
        if let Some(optics) = &self.optics {
            optics.validate()?;
            if optics.dim != self.dim {
                return Err(Error::ConfigGeneral(format!(
                    "optics.dim {} does not match dim {}",
                    optics.dim, self.dim
                )));
            }
        }
        if let Some((_, k)) = self.force_alice {
            if k >= self.dim {
                return Err(Error::ConfigGeneral(format!(
                    "force_alice state {k} outside 0..{}",
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

/// Pulse presets named after the two source settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    MuA,
    MuB,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Preset> {
        match s {
            "mu-a" | "mu_a" => Ok(Preset::MuA),
            "mu-b" | "mu_b" => Ok(Preset::MuB),
            other => Err(Error::Parse(format!(
                "unknown preset {other:?}: expected mu-a or mu-b"
            ))),
        }
    }

    pub fn pulse(self) -> PulseConfig {
        match self {
            Preset::MuA => PulseConfig::preset_mu_a(),
            Preset::MuB => PulseConfig::preset_mu_b(),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "dim",
    "model",
    "preset",
    "cycles",
    "seed.alice",
    "seed.bob",
    "seed.channel",
    "pulse.mu",
    "pulse.rep_rate_hz",
    "pulse.window_ns",
    "pulse.eta",
    "pulse.dark_rate_hz",
    "noise.phase_jitter_rad",
    "noise.background_click_prob",
    "optics.slit_width_m",
    "optics.slit_pitch_m",
    "optics.wavelength_m",
    "optics.focal_length_m",
    "optics.pinhole_diameter_m",
    "optics.samples_per_lobe",
    "output.dir",
];

struct RawEntry {
    line: usize,
    value: String,
}

/// Parses the `key = value` config text. Unknown and duplicate keys are
/// rejected with their line number; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<SessionConfig> {
    let mut entries: Vec<(String, RawEntry)> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config {
                line: line_no,
                message: "empty key or value".into(),
            });
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config {
                line: line_no,
                message: format!("unknown key {key:?}"),
            });
        }
        if !seen.insert(key.clone()) {
            return Err(Error::Config {
                line: line_no,
                message: format!("duplicate key {key:?}"),
            });
        }
        entries.push((
            key,
            RawEntry {
                line: line_no,
                value,
            },
        ));
    }

    let get = |key: &str| -> Option<&RawEntry> {
        entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    };
    let parse_f64 = |key: &str| -> Result<Option<f64>> {
        match get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<f64>().map(Some).map_err(|_| Error::Config {
                line: e.line,
                message: format!("{key}: expected a number, got {:?}", e.value),
            }),
        }
    };
    let parse_u64 = |key: &str| -> Result<Option<u64>> {
        match get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<u64>().map(Some).map_err(|_| Error::Config {
                line: e.line,
                message: format!("{key}: expected a non-negative integer, got {:?}", e.value),
            }),
        }
    };
    let require_u64 = |key: &str| -> Result<u64> {
        parse_u64(key)?.ok_or_else(|| Error::ConfigGeneral(format!("missing required key {key:?}")))
    };

    // Preset expands first; explicit pulse.* keys override it.
    let mut pulse = match get("preset") {
        Some(e) => Preset::parse(&e.value)
            .map_err(|err| Error::Config {
                line: e.line,
                message: err.to_string(),
            })?
            .pulse(),
        None => {
            let Some(mu) = parse_f64("pulse.mu")? else {
                return Err(Error::ConfigGeneral(
                    "missing pulse parameters: set `preset` or `pulse.mu`".into(),
                ));
            };
            PulseConfig {
                mu,
                rep_rate_hz: 30.0,
                window_ns: 50.0,
                eta: 1.0,
                dark_rate_hz: 0.0,
            }
        }
    };
    if let Some(v) = parse_f64("pulse.mu")? {
        pulse.mu = v;
    }
    if let Some(v) = parse_f64("pulse.rep_rate_hz")? {
        pulse.rep_rate_hz = v;
    }
    if let Some(v) = parse_f64("pulse.window_ns")? {
        pulse.window_ns = v;
    }
    if let Some(v) = parse_f64("pulse.eta")? {
        pulse.eta = v;
    }
    if let Some(v) = parse_f64("pulse.dark_rate_hz")? {
        pulse.dark_rate_hz = v;
    }

    let mut noise = NoiseConfig::none();
    if let Some(v) = parse_f64("noise.phase_jitter_rad")? {
        noise.phase_jitter_rad = v;
    }
    if let Some(v) = parse_f64("noise.background_click_prob")? {
        noise.background_click_prob = v;
    }

    let dim = parse_u64("dim")?.unwrap_or(16) as usize;

    let model = match get("model") {
        None => Model::Ideal,
        Some(e) => match e.value.as_str() {
            "ideal" => Model::Ideal,
            "optical" => Model::Optical,
            other => {
                return Err(Error::Config {
                    line: e.line,
                    message: format!("model must be `ideal` or `optical`, got {other:?}"),
                })
            }
        },
    };

    let mut optics = OpticalSetup::default_for_dim(dim);
    let mut optics_touched = false;
    if let Some(v) = parse_f64("optics.slit_width_m")? {
        optics.slit_width_m = v;
        optics_touched = true;
    }
    if let Some(v) = parse_f64("optics.slit_pitch_m")? {
        optics.slit_pitch_m = v;
        optics_touched = true;
    }
    if let Some(v) = parse_f64("optics.wavelength_m")? {
        optics.wavelength_m = v;
        optics_touched = true;
    }
    if let Some(v) = parse_f64("optics.focal_length_m")? {
        optics.focal_length_m = v;
        optics_touched = true;
    }
    if let Some(v) = parse_f64("optics.pinhole_diameter_m")? {
        optics.pinhole_diameter_m = v;
        optics_touched = true;
    }
    if let Some(v) = parse_u64("optics.samples_per_lobe")? {
        optics.samples_per_lobe = v as usize;
        optics_touched = true;
    }

    let seeds = SessionSeeds {
        alice: require_u64("seed.alice")?,
        bob: require_u64("seed.bob")?,
        channel: require_u64("seed.channel")?,
    };

    let config = SessionConfig {
        dim,
        model,
        pulse,
        noise,
        optics: if model == Model::Optical || optics_touched {
            Some(optics)
        } else {
            None
        },
        duration_cycles: require_u64("cycles")?,
        seeds,
        output_dir: get("output.dir").map(|e| PathBuf::from(&e.value)),
        force_alice: None,
    };
    config.validate()?;
    Ok(config)
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<SessionConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Output directory resolution: explicit flag beats the `HDQKD_OUTPUT_DIR`
/// environment variable, which beats the config file, which beats the
/// current directory.
pub fn resolve_output_dir(cli: Option<&Path>, config: &SessionConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("HDQKD_OUTPUT_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."))
}
