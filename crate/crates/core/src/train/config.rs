//! Plain-text `key = value` training configuration.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::auditory::Audiogram;
use crate::dsp::SMOOTHING_WINDOW_S;
use crate::objective::{Centering, DEFAULT_ALPHA};
use crate::{Error, Result};

/// Initial gain for listeners whose low-gain start stalls.
pub const PROFOUND_INIT_DB: f64 = 50.0;
pub const DEFAULT_INIT_DB: f64 = 1.0;
/// Four-frequency average (0.5, 1, 2, 4 kHz) at or above which a loss
/// counts as profound for initialisation.
pub const PROFOUND_PTA_DB: f64 = 90.0;

/// How the basilar-membrane correlation term of the index is filled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CbPolicy {
    /// C_B = 0.
    #[default]
    Zero,
    /// C_B = C_C.
    Mirror,
}

impl CbPolicy {
    pub fn value(self, c_c: f64) -> f64 {
        match self {
            CbPolicy::Zero => 0.0,
            CbPolicy::Mirror => c_c,
        }
    }
}

impl FromStr for CbPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(CbPolicy::Zero),
            "mirror" => Ok(CbPolicy::Mirror),
            _ => Err(Error::parse("cb_policy", format!("expected zero or mirror, got {s:?}"))),
        }
    }
}

impl std::fmt::Display for CbPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CbPolicy::Zero => "zero",
            CbPolicy::Mirror => "mirror",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Standard label or path; the CLI flag takes precedence.
    pub audiogram: Option<String>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub segment_seconds: f64,
    pub alpha: f64,
    /// `None` picks 1 dB, or 50 dB for profound losses.
    pub init_gain_db: Option<f64>,
    pub seed: u64,
    pub validation_every: usize,
    pub validation_segments: usize,
    /// Train/validation/test proportions for corpora without split
    /// directories.
    pub split: [f64; 3],
    pub cb_policy: CbPolicy,
    pub centering: Centering,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            audiogram: None,
            epochs: 4000,
            batch_size: 128,
            learning_rate: 0.001,
            segment_seconds: 0.5,
            alpha: DEFAULT_ALPHA,
            init_gain_db: None,
            seed: 0,
            validation_every: 25,
            validation_segments: 32,
            split: [0.8, 0.1, 0.1],
            cb_policy: CbPolicy::Zero,
            centering: Centering::None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| Error::parse(format!("config key {key}"), e.to_string()))
}

impl TrainingConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config", format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "audiogram" => self.audiogram = Some(v.to_string()),
            "epochs" => self.epochs = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "segment_seconds" => self.segment_seconds = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "init_gain_db" => {
                self.init_gain_db = if v == "auto" { None } else { Some(num(key, v)?) };
            }
            "seed" => self.seed = num(key, v)?,
            "validation_every" => self.validation_every = num(key, v)?,
            "validation_segments" => self.validation_segments = num(key, v)?,
            "split" => {
                let parts: Vec<f64> = v.split(['/', ',']).map(|p| num(key, p.trim())).collect::<Result<_>>()?;
                self.split = parts
                    .try_into()
                    .map_err(|_| Error::parse("config key split", "expected three proportions like 8/1/1"))?;
            }
            "cb_policy" => self.cb_policy = v.parse()?,
            "centering" => {
                self.centering = match v {
                    "none" => Centering::None,
                    "mean" => Centering::Mean,
                    _ => return Err(Error::parse("config key centering", format!("expected none or mean, got {v:?}"))),
                }
            }
            _ => return Err(Error::parse("config", format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size as f64),
            ("learning_rate", self.learning_rate),
            ("segment_seconds", self.segment_seconds),
            ("validation_every", self.validation_every as f64),
            ("validation_segments", self.validation_segments as f64),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if self.segment_seconds < SMOOTHING_WINDOW_S {
            return Err(Error::invalid(format!(
                "segment_seconds {} is shorter than the {SMOOTHING_WINDOW_S} s smoothing window",
                self.segment_seconds
            )));
        }
        if let Some(g) = self.init_gain_db {
            if !g.is_finite() {
                return Err(Error::invalid("init_gain_db must be finite"));
            }
        }
        if self.split.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || self.split.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid(format!("bad split proportions {:?}", self.split)));
        }
        Ok(())
    }

    /// Initial gain for `ag`: the configured value, else 50 dB for a
    /// profound loss and 1 dB otherwise.
    pub fn init_gain_for(&self, ag: &Audiogram) -> f64 {
        self.init_gain_db.unwrap_or_else(|| {
            let h = ag.thresholds();
            let pta = (h[1] + h[2] + h[3] + h[4]) / 4.0;
            if pta >= PROFOUND_PTA_DB {
                PROFOUND_INIT_DB
            } else {
                DEFAULT_INIT_DB
            }
        })
    }

    /// Canonical text form; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(a) = &self.audiogram {
            let _ = writeln!(s, "audiogram = {a}");
        }
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "segment_seconds = {:?}", self.segment_seconds);
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        match self.init_gain_db {
            Some(g) => writeln!(s, "init_gain_db = {g:?}"),
            None => writeln!(s, "init_gain_db = auto"),
        }
        .ok();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "validation_every = {}", self.validation_every);
        let _ = writeln!(s, "validation_segments = {}", self.validation_segments);
        let _ = writeln!(s, "split = {:?}/{:?}/{:?}", self.split[0], self.split[1], self.split[2]);
        let _ = writeln!(s, "cb_policy = {}", self.cb_policy);
        let _ = writeln!(
            s,
            "centering = {}",
            match self.centering {
                Centering::None => "none",
                Centering::Mean => "mean",
            }
        );
        s
    }
}
