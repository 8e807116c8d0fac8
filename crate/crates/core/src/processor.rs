//! Hearing-aid processors: the six-gain trainable FIR and the NAL-R baseline.
//!
//! The FIR is designed by frequency sampling. Gains in dB at the six
//! audiogram frequencies are interpolated linearly against log-frequency
//! onto the FFT bin grid (held constant outside 250 Hz..6 kHz), converted to
//! linear magnitude, turned into a zero-phase impulse response by an inverse
//! real DFT, centred, and tapered with a periodic Hann window. The result is
//! symmetric about tap `taps / 2` (tap 0 is zero), so filtering with that
//! delay removed is zero-phase.

use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auditory::Audiogram;
use crate::dsp::{fir_convolve_aligned, hann_periodic, Signal};
use crate::{Error, Result, AUDIOGRAM_FREQS, MODEL_RATE};

/// Long enough that every standard-audiogram NAL-R prescription lands within
/// 0.5 dB of its anchors. Anchor error grows with the gain slope and is worst
/// at low frequency: about 0.04 dB per dB/octave at 250 Hz, halving with
/// each octave up.
pub const PROCESSOR_TAPS: usize = 1024;
pub const MIN_GAIN_DB: f64 = -20.0;
pub const MAX_GAIN_DB: f64 = 80.0;

/// Six insertion gains in dB at the audiogram frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainParams([f64; 6]);

impl GainParams {
    /// Builds gains, clamping into [-20, 80] dB. Non-finite values are rejected.
    pub fn new(gains: [f64; 6]) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("gain parameters must be finite"));
        }
        Ok(Self(gains.map(|g| g.clamp(MIN_GAIN_DB, MAX_GAIN_DB))))
    }

    pub fn flat(db: f64) -> Result<Self> {
        Self::new([db; 6])
    }

    pub fn identity() -> Self {
        Self([0.0; 6])
    }

    pub fn values(&self) -> &[f64; 6] {
        &self.0
    }

    /// True if any gain sits on the clamp rails.
    pub fn saturated(&self) -> bool {
        self.0.iter().any(|&g| g <= MIN_GAIN_DB || g >= MAX_GAIN_DB)
    }

    /// Copy with one gain moved by `delta` dB.
    pub fn nudged(&self, k: usize, delta: f64) -> Result<Self> {
        let mut g = self.0;
        g[k] += delta;
        Self::new(g)
    }
}

impl fmt::Display for GainParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|g| format!("{g:.2}")).collect();
        write!(f, "[{}] dB", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterSource {
    Trained,
    Prescribed,
    Identity,
}

impl fmt::Display for FilterSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterSource::Trained => "trained",
            FilterSource::Prescribed => "prescribed",
            FilterSource::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessorFilter {
    pub coeffs: Vec<f64>,
    pub rate: f64,
    pub source: FilterSource,
}

impl ProcessorFilter {
    /// Samples of latency removed by [`apply_processor`].
    pub fn delay(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// Magnitude response in dB at `f` Hz.
    pub fn response_db(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f / self.rate;
        let (re, im) = self
            .coeffs
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, &h)| (re + h * (w * n as f64).cos(), im - h * (w * n as f64).sin()));
        10.0 * (re * re + im * im).log10()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("tap,coefficient\n");
        for (n, c) in self.coeffs.iter().enumerate() {
            text.push_str(&format!("{n},{c:e}\n"));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Frequency-sampling FIR designer with its linear pieces precomputed, so
/// the map gains -> taps and its transpose are cheap.
#[derive(Debug, Clone)]
pub struct FirDesigner {
    taps: usize,
    rate: f64,
    /// Per FFT bin: (lower anchor, weight of lower, weight of upper).
    interp: Vec<(usize, f64, f64)>,
    /// `synth[n][k]`: tap `n` per unit linear magnitude at bin `k`,
    /// Hann window and centring included.
    synth: Vec<Vec<f64>>,
}

impl FirDesigner {
    pub fn new(taps: usize, rate: f64) -> Result<Self> {
        if taps < 4 || !taps.is_multiple_of(2) {
            return Err(Error::invalid(format!("processor tap count must be even and >= 4, got {taps}")));
        }
        if !(rate > 2.0 * AUDIOGRAM_FREQS[5]) {
            return Err(Error::invalid(format!("rate {rate} Hz cannot represent 6 kHz")));
        }
        let bins = taps / 2 + 1;
        let logs = AUDIOGRAM_FREQS.map(f64::log10);
        let interp = (0..bins)
            .map(|k| {
                let f = k as f64 * rate / taps as f64;
                if f <= AUDIOGRAM_FREQS[0] {
                    (0, 1.0, 0.0)
                } else if f >= AUDIOGRAM_FREQS[5] {
                    (4, 0.0, 1.0)
                } else {
                    let lf = f.log10();
                    let j = logs.windows(2).position(|w| lf <= w[1]).unwrap_or(4);
                    let u = (lf - logs[j]) / (logs[j + 1] - logs[j]);
                    (j, 1.0 - u, u)
                }
            })
            .collect();
        let window = hann_periodic(taps);
        let half = taps / 2;
        let synth = (0..taps)
            .map(|n| {
                let m = n as f64 - half as f64;
                (0..bins)
                    .map(|k| {
                        let c = if k == 0 || k == half { 1.0 } else { 2.0 };
                        window[n] * c * (2.0 * PI * k as f64 * m / taps as f64).cos() / taps as f64
                    })
                    .collect()
            })
            .collect();
        Ok(Self { taps, rate, interp, synth })
    }

    pub fn standard() -> Self {
        Self::new(PROCESSOR_TAPS, MODEL_RATE).expect("standard processor design is valid")
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Desired linear magnitude on the bin grid.
    pub fn magnitudes(&self, p: &GainParams) -> Vec<f64> {
        let g = p.values();
        self.interp.iter().map(|&(j, wl, wu)| 10f64.powf((wl * g[j] + wu * g[j + 1]) / 20.0)).collect()
    }

    pub fn design(&self, p: &GainParams, source: FilterSource) -> ProcessorFilter {
        let mags = self.magnitudes(p);
        let coeffs = self.synth.iter().map(|row| row.iter().zip(&mags).map(|(a, b)| a * b).sum()).collect();
        ProcessorFilter { coeffs, rate: self.rate, source }
    }

    /// Pulls a gradient w.r.t. the taps back to the six gains.
    pub fn backward(&self, p: &GainParams, coeff_grad: &[f64]) -> [f64; 6] {
        assert_eq!(coeff_grad.len(), self.taps);
        let mags = self.magnitudes(p);
        let mut out = [0.0; 6];
        for (k, (&(j, wl, wu), m)) in self.interp.iter().zip(&mags).enumerate() {
            let mag_grad: f64 = self.synth.iter().zip(coeff_grad).map(|(row, g)| row[k] * g).sum();
            let db_grad = mag_grad * m * LN_10 / 20.0;
            out[j] += wl * db_grad;
            out[j + 1] += wu * db_grad;
        }
        out
    }
}

/// Designs the processor FIR for `p`.
pub fn gains_to_fir(p: &GainParams, rate: f64, taps: usize) -> Result<ProcessorFilter> {
    let source = if *p == GainParams::identity() { FilterSource::Identity } else { FilterSource::Trained };
    Ok(FirDesigner::new(taps, rate)?.design(p, source))
}

/// Filters `sig` with latency compensation; output length equals input length.
pub fn apply_processor(sig: &Signal, f: &ProcessorFilter) -> Result<Signal> {
    if sig.rate() != f.rate {
        return Err(Error::invalid(format!("signal rate {} vs filter rate {}", sig.rate(), f.rate)));
    }
    fir_convolve_aligned(sig, &f.coeffs, f.delay())
}

/// NAL-R frequency corrections at the six audiogram frequencies, dB.
const NALR_CORRECTION: [f64; 6] = [-17.0, -8.0, 1.0, -1.0, -2.0, -2.0];

/// NAL-R prescription: `0.05 (H500 + H1000 + H2000) + 0.31 H(f) + k(f)`,
/// with negative gains raised to 0 dB. An audiogram with no loss at all gets
/// no amplification.
pub fn nalr_gains(ag: &Audiogram) -> GainParams {
    if ag.is_zero() {
        return GainParams::identity();
    }
    let h = ag.thresholds();
    let x = 0.05 * (h[1] + h[2] + h[3]);
    let mut g = [0.0; 6];
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = (x + 0.31 * h[i] + NALR_CORRECTION[i]).max(0.0);
    }
    GainParams::new(g).expect("prescription is finite")
}

/// Serialized gain record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub label: String,
    pub source: FilterSource,
    pub frequencies_hz: Vec<f64>,
    pub gains_db: Vec<f64>,
}

impl GainRecord {
    pub fn new(label: impl Into<String>, source: FilterSource, gains: &GainParams) -> Self {
        Self {
            label: label.into(),
            source,
            frequencies_hz: AUDIOGRAM_FREQS.to_vec(),
            gains_db: gains.values().to_vec(),
        }
    }

    pub fn gains(&self) -> Result<GainParams> {
        let g: [f64; 6] = self
            .gains_db
            .as_slice()
            .try_into()
            .map_err(|_| Error::parse("gain record", format!("expected 6 gains, got {}", self.gains_db.len())))?;
        GainParams::new(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: Self =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        r.gains()?;
        Ok(r)
    }
}
