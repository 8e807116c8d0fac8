//! Signal containers and the generic DSP pieces everything else is built on.

mod convolve;
pub mod fft;
mod resample;
pub mod wav;

pub use convolve::{fir_convolve, fir_convolve_aligned};
pub use resample::resample;

use crate::{Error, Result};

/// Level in dB SPL that an RMS (or envelope) value of 1.0 stands for.
pub const REFERENCE_SPL_DB: f64 = 65.0;

/// Linear floor applied before taking logarithms; -55 dB SPL.
pub const ENVELOPE_FLOOR: f64 = 1e-6;

/// Envelope smoothing window length in seconds (hop is half of it).
pub const SMOOTHING_WINDOW_S: f64 = 0.016;

/// Sampled mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    rate: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {rate}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, rate })
    }

    pub fn zeros(len: usize, rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len], rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Contiguous sub-range `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len())
            .ok_or_else(|| Error::invalid("slice out of range"))?;
        Ok(Self { samples: self.samples[start..end].to_vec(), rate: self.rate })
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Scales the signal so its RMS is one, i.e. 65 dB SPL by convention.
pub fn rms_normalize(sig: &Signal) -> Result<Signal> {
    let r = sig.rms();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::degenerate("cannot RMS-normalize a silent signal"));
    }
    let samples = sig.samples.iter().map(|v| v / r).collect();
    Ok(Signal { samples, rate: sig.rate })
}

/// Linear envelope value to dB SPL with the 1e-6 floor.
#[inline]
pub fn to_db_spl(env: f64) -> f64 {
    REFERENCE_SPL_DB + 20.0 * env.max(ENVELOPE_FLOOR).log10()
}

/// Periodic Hann window, `w[n] = 0.5 - 0.5 cos(2 pi n / len)`.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()).collect()
}

/// Band-by-frame envelope in dB, `values[band][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedEnvelope {
    values: Vec<Vec<f64>>,
    frame_rate: f64,
}

impl FramedEnvelope {
    pub fn new(values: Vec<Vec<f64>>, frame_rate: f64) -> Result<Self> {
        let frames = values.first().map_or(0, Vec::len);
        if values.iter().any(|b| b.len() != frames) {
            return Err(Error::invalid("bands have differing frame counts"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { stage: "framed envelope" });
        }
        Ok(Self { values, frame_rate })
    }

    pub fn bands(&self) -> usize {
        self.values.len()
    }

    pub fn frames(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn band(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, b)| b.iter().enumerate().map(|(m, &v)| f(i, m, v)).collect())
            .collect();
        Self { values, frame_rate: self.frame_rate }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        if self.bands() != other.bands() || self.frames() != other.frames() {
            return Err(Error::invalid(format!(
                "envelope shapes differ: {}x{} vs {}x{}",
                self.bands(),
                self.frames(),
                other.bands(),
                other.frames()
            )));
        }
        Ok(())
    }
}

/// Hann-weighted frame averaging, 50% overlap.
///
/// Weights are `sin^2(pi (n + 0.5) / win)`, a Hann shape sampled at
/// half-integer points so no tap is zero, normalised to sum to one.
#[derive(Debug, Clone)]
pub struct FrameSmoother {
    weights: Vec<f64>,
    hop: usize,
}

impl FrameSmoother {
    pub fn for_rate(rate: f64) -> Result<Self> {
        let win = (SMOOTHING_WINDOW_S * rate).round() as usize;
        Self::new(win)
    }

    pub fn new(win: usize) -> Result<Self> {
        if win < 2 {
            return Err(Error::invalid(format!("smoothing window of {win} samples is too short")));
        }
        let raw: Vec<f64> =
            (0..win).map(|n| (std::f64::consts::PI * (n as f64 + 0.5) / win as f64).sin().powi(2)).collect();
        let total: f64 = raw.iter().sum();
        Ok(Self { weights: raw.iter().map(|w| w / total).collect(), hop: win / 2 })
    }

    pub fn window(&self) -> usize {
        self.weights.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frame_count(&self, len: usize) -> Option<usize> {
        (len >= self.window()).then(|| (len - self.window()) / self.hop + 1)
    }

    pub fn smooth(&self, x: &[f64]) -> Result<Vec<f64>> {
        let frames = self.frame_count(x.len()).ok_or_else(|| {
            Error::degenerate(format!(
                "envelope of {} samples is shorter than one {}-sample window",
                x.len(),
                self.window()
            ))
        })?;
        Ok((0..frames)
            .map(|m| {
                let start = m * self.hop;
                self.weights.iter().zip(&x[start..]).map(|(w, v)| w * v).sum()
            })
            .collect())
    }

    /// Transpose of [`smooth`](Self::smooth): frame gradients back to samples.
    pub fn adjoint(&self, frame_grad: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (m, g) in frame_grad.iter().enumerate() {
            let start = m * self.hop;
            for (o, w) in out[start..start + self.window()].iter_mut().zip(&self.weights) {
                *o += g * w;
            }
        }
        out
    }
}

/// Smooths per-sample dB envelopes (one row per band) into frames.
pub fn frame_smooth(env: &[Vec<f64>], rate: f64) -> Result<FramedEnvelope> {
    let smoother = FrameSmoother::for_rate(rate)?;
    let values = env.iter().map(|band| smoother.smooth(band)).collect::<Result<Vec<_>>>()?;
    FramedEnvelope::new(values, rate / smoother.hop() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_normalize_constant() {
        let s = Signal::new(vec![0.5; 100], 16000.0).unwrap();
        let n = rms_normalize(&s).unwrap();
        assert!(n.samples().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rms_normalize_sine_amplitude() {
        let s: Vec<f64> =
            (0..16000).map(|n| 2.0 * (2.0 * std::f64::consts::PI * 100.0 * n as f64 / 16000.0).sin()).collect();
        let n = rms_normalize(&Signal::new(s, 16000.0).unwrap()).unwrap();
        let peak = n.samples().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((peak - 2f64.sqrt()).abs() < 1e-9, "{peak}");
        assert!((n.rms() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rms_normalize_rejects_silence() {
        let s = Signal::zeros(10, 16000.0).unwrap();
        assert!(matches!(rms_normalize(&s), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn signal_rejects_bad_input() {
        assert!(Signal::new(vec![0.0], 0.0).is_err());
        assert!(Signal::new(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn db_conversion() {
        assert!((to_db_spl(1.0) - 65.0).abs() < 1e-12);
        assert!((to_db_spl(0.0) + 55.0).abs() < 1e-12);
        assert!((to_db_spl(0.1) - 45.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_window_at_24k() {
        let s = FrameSmoother::for_rate(24_000.0).unwrap();
        assert_eq!(s.window(), 384);
        assert_eq!(s.hop(), 192);
        assert_eq!(s.frame_count(12_000), Some((12_000 - 384) / 192 + 1));
        assert_eq!(s.frame_count(383), None);
    }

    #[test]
    fn smoothing_constant_and_ramp() {
        let s = FrameSmoother::for_rate(24_000.0).unwrap();
        let c = s.smooth(&vec![42.0; 2000]).unwrap();
        assert!(c.iter().all(|v| (v - 42.0).abs() < 1e-12));
        let ramp: Vec<f64> = (0..2000).map(|n| n as f64 / 1999.0).collect();
        let r = s.smooth(&ramp).unwrap();
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!(matches!(s.smooth(&[0.0; 100]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn smoothing_adjoint_is_transpose() {
        let s = FrameSmoother::new(16).unwrap();
        let x: Vec<f64> = (0..100).map(|n| ((n * 7919) % 13) as f64 - 6.0).collect();
        let y = s.smooth(&x).unwrap();
        let g: Vec<f64> = (0..y.len()).map(|m| (m as f64).cos()).collect();
        let xa = s.adjoint(&g, x.len());
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&xa).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn frame_smooth_shapes() {
        let env = vec![vec![3.0; 1000], vec![-1.0; 1000]];
        let f = frame_smooth(&env, 24_000.0).unwrap();
        assert_eq!(f.bands(), 2);
        assert_eq!(f.frames(), 4);
        assert!((f.frame_rate() - 125.0).abs() < 1e-12);
        assert!(f.band(1).iter().all(|v| (v + 1.0).abs() < 1e-12));
    }
}
