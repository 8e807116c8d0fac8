use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, AUDIOGRAM_FREQS};

const MAX_LOSS_DB: f64 = 100.0;

const STANDARD_JSON: &str = include_str!("../../data/standard_audiograms.json");

/// Hearing thresholds in dB HL at 250, 500, 1000, 2000, 4000 and 6000 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audiogram {
    label: String,
    thresholds: [f64; 6],
}

/// On-disk audiogram record.
#[derive(Debug, Serialize, Deserialize)]
struct AudiogramRecord {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frequencies_hz: Option<Vec<f64>>,
    thresholds_db_hl: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct StandardSet {
    audiograms: Vec<AudiogramRecord>,
}

impl Audiogram {
    /// Builds an audiogram, clamping each threshold into [0, 100] dB HL.
    pub fn new(label: impl Into<String>, thresholds: [f64; 6]) -> Result<Self> {
        let label = label.into();
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("audiogram {label}: non-finite threshold")));
        }
        let clamped = thresholds.map(|t| t.clamp(0.0, MAX_LOSS_DB));
        if clamped != thresholds {
            log::warn!("audiogram {label}: thresholds clamped to [0, {MAX_LOSS_DB}] dB HL");
        }
        Ok(Self { label, thresholds: clamped })
    }

    pub fn zero() -> Self {
        Self { label: "NH".into(), thresholds: [0.0; 6] }
    }

    pub fn flat(level_db: f64) -> Result<Self> {
        Self::new(format!("flat{level_db}"), [level_db; 6])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn thresholds(&self) -> &[f64; 6] {
        &self.thresholds
    }

    pub fn is_zero(&self) -> bool {
        self.thresholds.iter().all(|&t| t == 0.0)
    }

    /// The ten bundled standard audiograms N1..N7, S1..S3.
    pub fn standard_set() -> Vec<Audiogram> {
        let set: StandardSet = serde_json::from_str(STANDARD_JSON).expect("bundled audiogram data is valid");
        set.audiograms.into_iter().map(|r| Self::from_record(r).expect("bundled audiogram data is valid")).collect()
    }

    pub fn standard(label: &str) -> Option<Audiogram> {
        Self::standard_set().into_iter().find(|a| a.label.eq_ignore_ascii_case(label))
    }

    fn from_record(r: AudiogramRecord) -> Result<Self> {
        if let Some(f) = &r.frequencies_hz {
            if f.as_slice() != AUDIOGRAM_FREQS {
                return Err(Error::parse("audiogram", format!("frequencies must be {AUDIOGRAM_FREQS:?}")));
            }
        }
        let thresholds: [f64; 6] = r.thresholds_db_hl.as_slice().try_into().map_err(|_| {
            Error::parse("audiogram", format!("expected 6 thresholds, got {}", r.thresholds_db_hl.len()))
        })?;
        Self::new(r.label, thresholds)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let r: AudiogramRecord = serde_json::from_str(text).map_err(|e| Error::parse("audiogram", e.to_string()))?;
        Self::from_record(r)
    }

    pub fn to_json_string(&self) -> String {
        let r = AudiogramRecord {
            label: self.label.clone(),
            frequencies_hz: Some(AUDIOGRAM_FREQS.to_vec()),
            thresholds_db_hl: self.thresholds.to_vec(),
        };
        serde_json::to_string_pretty(&r).expect("serializable")
    }

    /// Loads a JSON audiogram file. When no such file exists, `path` may
    /// instead name a bundled standard audiogram (N1..N7, S1..S3) or a flat
    /// loss such as `flat40`.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            if let Some(name) = path.to_str() {
                if let Some(a) = Self::standard(name) {
                    return Ok(a);
                }
                if let Some(level) = name.strip_prefix("flat").and_then(|v| v.parse::<f64>().ok()) {
                    return Self::flat(level);
                }
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::parse(path.display().to_string(), msg),
            other => other,
        })
    }
}

/// Total loss per band: linear in log10(frequency) between the six audiogram
/// points, held constant below 250 Hz and above 6 kHz.
pub fn interpolate_audiogram(ag: &Audiogram, centers: &[f64]) -> Vec<f64> {
    let t = ag.thresholds();
    let logs = AUDIOGRAM_FREQS.map(f64::log10);
    centers
        .iter()
        .map(|&f| {
            if f <= AUDIOGRAM_FREQS[0] {
                return t[0];
            }
            if f >= AUDIOGRAM_FREQS[5] {
                return t[5];
            }
            let lf = f.log10();
            let k = logs.windows(2).position(|w| lf <= w[1]).unwrap_or(4);
            let u = (lf - logs[k]) / (logs[k + 1] - logs[k]);
            t[k] + u * (t[k + 1] - t[k])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_set_is_complete_and_capped() {
        let set = Audiogram::standard_set();
        let labels: Vec<&str> = set.iter().map(|a| a.label()).collect();
        assert_eq!(labels, ["N1", "N2", "N3", "N4", "N5", "N6", "N7", "S1", "S2", "S3"]);
        assert!(set.iter().flat_map(|a| a.thresholds()).all(|&t| (0.0..=100.0).contains(&t)));
    }

    #[test]
    fn json_clamps_and_validates() {
        let a = Audiogram::from_json_str(r#"{"label":"x","thresholds_db_hl":[-5, 10, 20, 30, 105, 120]}"#).unwrap();
        assert_eq!(a.thresholds(), &[0.0, 10.0, 20.0, 30.0, 100.0, 100.0]);
        assert!(Audiogram::from_json_str(r#"{"label":"x","thresholds_db_hl":[1,2,3]}"#).is_err());
        assert!(Audiogram::from_json_str("{not json").is_err());
        let back = Audiogram::from_json_str(&a.to_json_string()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn interpolation_rules() {
        let flat = Audiogram::flat(40.0).unwrap();
        assert!(interpolate_audiogram(&flat, &[80.0, 700.0, 9000.0]).iter().all(|&v| v == 40.0));
        let a = Audiogram::new("s", [10.0, 20.0, 30.0, 50.0, 70.0, 90.0]).unwrap();
        let v = interpolate_audiogram(&a, &[1000.0, (1000.0f64 * 2000.0).sqrt(), 100.0, 7000.0]);
        assert!((v[0] - 30.0).abs() < 1e-12);
        assert!((v[1] - 40.0).abs() < 1e-9);
        assert_eq!(v[2], 10.0);
        assert_eq!(v[3], 90.0);
    }

    #[test]
    fn load_by_name_or_file() {
        assert_eq!(Audiogram::load(Path::new("S2")).unwrap(), Audiogram::standard("S2").unwrap());
        assert_eq!(Audiogram::load(Path::new("flat40")).unwrap().thresholds(), &[40.0; 6]);
        assert!(Audiogram::load(Path::new("no-such-audiogram")).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        std::fs::write(&path, Audiogram::standard("N4").unwrap().to_json_string()).unwrap();
        assert_eq!(Audiogram::load(&path).unwrap(), Audiogram::standard("N4").unwrap());
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(Audiogram::load(&path), Err(Error::Parse { .. })));
    }
}
