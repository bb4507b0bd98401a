//! Flat `key = value` experiment configuration.
//!
//! | key                 | unit / form                                   | required |
//! |---------------------|-----------------------------------------------|----------|
//! | `center_frequency`  | Hz                                            | yes      |
//! | `bandwidth`         | Hz                                            | yes      |
//! | `freq_samples`      | count `M`                                     | yes      |
//! | `receivers`         | count `N`                                     | yes      |
//! | `aperture`          | radians, or `2pi`-style multiples of `pi`     | no (2π)  |
//! | `receiver_range`    | meters (ground range)                         | yes      |
//! | `receiver_height`   | meters                                        | yes      |
//! | `tx_position`       | meters, `x, y, z`                             | yes      |
//! | `scene_side`        | meters `L`                                    | yes      |
//! | `points_per_side`   | count                                         | yes      |
//! | `snr_db`            | decibels, or `none` for noiseless             | no       |
//! | `iterations`        | count                                         | no (4000)|
//! | `step_size`         | unitless `μ`                                  | no (0.2) |
//! | `seed`              | unsigned integer                              | no (0)   |
//! | `oversample_factor` | integer `q ≥ 1`                               | no (1)   |
//! | `amplitude_mode`    | `compensated` or `physical`                   | no       |
//! | `phase_model`       | `exact` or `farfield`                         | no       |
//! | `scene`             | phantom name or `pgm:<path>`                  | yes      |
//!
//! `#` starts a comment. Frequencies are converted to rad/s on load.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::{AmplitudeMode, PhaseModel, SpectralGrid};
use crate::geometry::{Geometry, SceneGrid};
use crate::solver::SolverConfig;

pub const ACTIVE_PRESET: &str = include_str!("../../../../presets/active.cfg");
pub const PASSIVE_PRESET: &str = include_str!("../../../../presets/passive.cfg");

/// Everything one reconstruction needs. Angular frequencies are in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `ω_c`, rad/s.
    pub center_frequency: f64,
    /// `B`, rad/s.
    pub bandwidth: f64,
    pub freq_samples: usize,
    pub receivers: usize,
    /// Radians.
    pub aperture: f64,
    /// Meters.
    pub receiver_range: f64,
    /// Meters.
    pub receiver_height: f64,
    /// Meters.
    pub tx_position: [f64; 3],
    /// Meters.
    pub scene_side: f64,
    pub points_per_side: usize,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    pub oversample_factor: usize,
    pub amplitude_mode: AmplitudeMode,
    pub phase_model: PhaseModel,
    pub scene: String,
}

/// Parameter varied by a sweep. Values use config-file units (Hz, dB, count).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Receivers,
    Bandwidth,
    CenterFrequency,
    Snr,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Receivers => "receivers",
            SweepAxis::Bandwidth => "bandwidth",
            SweepAxis::CenterFrequency => "center_frequency",
            SweepAxis::Snr => "snr",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "receivers" => Ok(SweepAxis::Receivers),
            "bandwidth" => Ok(SweepAxis::Bandwidth),
            "center_frequency" => Ok(SweepAxis::CenterFrequency),
            "snr" | "snr_db" => Ok(SweepAxis::Snr),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}` (expected receivers, bandwidth, center_frequency or snr)"
            ))),
        }
    }
}

fn field_error(key: &str, reason: impl fmt::Display) -> Error {
    Error::Config(format!("{key}: {reason}"))
}

fn parse_angle(key: &str, raw: &str) -> Result<f64> {
    let s = raw.replace(' ', "").to_ascii_lowercase();
    if let Some(coef) = s.strip_suffix("pi") {
        let coef = coef.trim_end_matches('*');
        let c = if coef.is_empty() {
            1.0
        } else {
            coef.parse::<f64>().map_err(|_| field_error(key, format!("cannot parse `{raw}`")))?
        };
        return Ok(c * PI);
    }
    s.parse::<f64>()
        .map_err(|_| field_error(key, format!("cannot parse `{raw}`")))
}

struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| field_error(key, "missing"))
    }

    fn parse<T: FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse::<T>()
            .map_err(|_| field_error(key, format!("cannot parse `{raw}`")))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.required(key)?;
        self.parse(key, raw)
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "center_frequency",
    "bandwidth",
    "freq_samples",
    "receivers",
    "aperture",
    "receiver_range",
    "receiver_height",
    "tx_position",
    "scene_side",
    "points_per_side",
    "snr_db",
    "iterations",
    "step_size",
    "seed",
    "oversample_factor",
    "amplitude_mode",
    "phase_model",
    "scene",
];

impl ExperimentConfig {
    /// Parses and validates config text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(field_error(key, "unknown key"));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(field_error(key, "given twice"));
            }
        }
        let f = Fields { map };

        let tx_raw = f.required("tx_position")?;
        let tx: Vec<f64> = tx_raw
            .split(',')
            .map(|p| f.parse::<f64>("tx_position", p.trim()))
            .collect::<Result<_>>()?;
        let tx_position: [f64; 3] = tx
            .try_into()
            .map_err(|_| field_error("tx_position", "expected three comma-separated meters"))?;

        let snr_db = match f.raw("snr_db") {
            None => None,
            Some(s) if s.eq_ignore_ascii_case("none") => None,
            Some(s) => Some(f.parse::<f64>("snr_db", s)?),
        };
        let amplitude_mode = match f.raw("amplitude_mode").unwrap_or("compensated") {
            "compensated" => AmplitudeMode::Compensated,
            "physical" => AmplitudeMode::Physical,
            other => return Err(field_error("amplitude_mode", format!("unknown mode `{other}`"))),
        };
        let phase_model = match f.raw("phase_model").unwrap_or("exact") {
            "exact" => PhaseModel::Exact,
            "farfield" => PhaseModel::FarField,
            other => return Err(field_error("phase_model", format!("unknown model `{other}`"))),
        };
        let aperture = match f.raw("aperture") {
            Some(raw) => parse_angle("aperture", raw)?,
            None => TAU,
        };

        let cfg = Self {
            center_frequency: TAU * f.get::<f64>("center_frequency")?,
            bandwidth: TAU * f.get::<f64>("bandwidth")?,
            freq_samples: f.get("freq_samples")?,
            receivers: f.get("receivers")?,
            aperture,
            receiver_range: f.get("receiver_range")?,
            receiver_height: f.get("receiver_height")?,
            tx_position,
            scene_side: f.get("scene_side")?,
            points_per_side: f.get("points_per_side")?,
            snr_db,
            iterations: f.get_or("iterations", 4000)?,
            step_size: f.get_or("step_size", 0.2)?,
            seed: f.get_or("seed", 0)?,
            oversample_factor: f.get_or("oversample_factor", 1)?,
            amplitude_mode,
            phase_model,
            scene: f.required("scene")?.to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("center_frequency", self.center_frequency),
            ("bandwidth", self.bandwidth),
            ("aperture", self.aperture),
            ("receiver_range", self.receiver_range),
            ("scene_side", self.scene_side),
            ("step_size", self.step_size),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(field_error(key, "must be positive and finite"));
            }
        }
        if !(self.receiver_height >= 0.0) || !self.receiver_height.is_finite() {
            return Err(field_error("receiver_height", "must be non-negative and finite"));
        }
        if self.bandwidth > 2.0 * self.center_frequency {
            return Err(field_error(
                "bandwidth",
                "exceeds twice the center frequency, so the lowest sample frequency would be negative",
            ));
        }
        if self.aperture > TAU + 1e-12 {
            return Err(field_error("aperture", "must not exceed 2π"));
        }
        let counts = [
            ("freq_samples", self.freq_samples, 1),
            ("receivers", self.receivers, 2),
            ("points_per_side", self.points_per_side, 1),
            ("oversample_factor", self.oversample_factor, 1),
        ];
        for (key, v, min) in counts {
            if v < min {
                return Err(field_error(key, format!("must be at least {min}")));
            }
        }
        if self.tx_position.iter().any(|v| !v.is_finite()) {
            return Err(field_error("tx_position", "must be finite"));
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return Err(field_error("snr_db", "must be a number"));
            }
        }
        if self.scene.is_empty() {
            return Err(field_error("scene", "must name a phantom or `pgm:<path>`"));
        }
        Ok(())
    }

    pub fn spectral(&self) -> Result<SpectralGrid<f64>> {
        SpectralGrid::new(self.center_frequency, self.bandwidth, self.freq_samples)
    }

    pub fn grid(&self) -> Result<SceneGrid<f64>> {
        SceneGrid::new(self.scene_side, self.points_per_side)
    }

    /// Grid of `points_per_side · q` points per side used to synthesize data.
    pub fn simulation_grid(&self) -> Result<SceneGrid<f64>> {
        SceneGrid::new(self.scene_side, self.points_per_side * self.oversample_factor)
    }

    pub fn geometry(&self) -> Result<Geometry<f64>> {
        Geometry::arc(
            self.receivers,
            self.aperture,
            self.receiver_range,
            self.receiver_height,
            self.tx_position,
        )
    }

    pub fn solver(&self, seed: u64) -> SolverConfig<f64> {
        SolverConfig {
            max_iterations: self.iterations,
            step_size: self.step_size,
            seed,
            ..SolverConfig::default()
        }
    }

    /// Copy with one parameter replaced; `value` is in config-file units.
    pub fn with_axis_value(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        match axis {
            SweepAxis::Receivers => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(field_error("receivers", format!("`{value}` is not a count")));
                }
                cfg.receivers = value as usize;
            }
            SweepAxis::Bandwidth => cfg.bandwidth = TAU * value,
            SweepAxis::CenterFrequency => cfg.center_frequency = TAU * value,
            SweepAxis::Snr => cfg.snr_db = Some(value),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Current value of `axis` in config-file units; noiseless SNR reads as `+∞`.
    pub fn axis_value(&self, axis: SweepAxis) -> f64 {
        match axis {
            SweepAxis::Receivers => self.receivers as f64,
            SweepAxis::Bandwidth => self.bandwidth / TAU,
            SweepAxis::CenterFrequency => self.center_frequency / TAU,
            SweepAxis::Snr => self.snr_db.unwrap_or(f64::INFINITY),
        }
    }

    /// Renders the config back to file form (frequencies in Hz).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("center_frequency", format!("{}", self.center_frequency / TAU));
        put("bandwidth", format!("{}", self.bandwidth / TAU));
        put("freq_samples", self.freq_samples.to_string());
        put("receivers", self.receivers.to_string());
        put("aperture", format!("{}", self.aperture));
        put("receiver_range", format!("{}", self.receiver_range));
        put("receiver_height", format!("{}", self.receiver_height));
        let [x, y, z] = self.tx_position;
        put("tx_position", format!("{x}, {y}, {z}"));
        put("scene_side", format!("{}", self.scene_side));
        put("points_per_side", self.points_per_side.to_string());
        put(
            "snr_db",
            self.snr_db.map_or("none".to_string(), |v| format!("{v}")),
        );
        put("iterations", self.iterations.to_string());
        put("step_size", format!("{}", self.step_size));
        put("seed", self.seed.to_string());
        put("oversample_factor", self.oversample_factor.to_string());
        put(
            "amplitude_mode",
            match self.amplitude_mode {
                AmplitudeMode::Compensated => "compensated",
                AmplitudeMode::Physical => "physical",
            }
            .to_string(),
        );
        put(
            "phase_model",
            match self.phase_model {
                PhaseModel::Exact => "exact",
                PhaseModel::FarField => "farfield",
            }
            .to_string(),
        );
        put("scene", self.scene.clone());
        s
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text)
}

/// Built-in preset by name (`active` or `passive`).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "active" => ExperimentConfig::parse(ACTIVE_PRESET),
        "passive" => ExperimentConfig::parse(PASSIVE_PRESET),
        other => Err(Error::Config(format!("unknown preset `{other}`"))),
    }
}
