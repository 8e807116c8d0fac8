use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::dsp::fft::SpectralPlan;
use crate::dsp::Signal;
use crate::{Error, Result};

/// Gammatone length at 24 kHz. Long enough for the narrowest band
/// (about 33 Hz bandwidth at 80 Hz) to decay by more than 60 dB.
pub const GAMMATONE_TAPS_24K: usize = 2048;

/// Filter order.
const ORDER: i32 = 4;

/// Frequency shift of the control filterbank along the cochlea.
const CONTROL_SHIFT: f64 = 0.02;

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_inv(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `count` centre frequencies equally spaced in mel between `lo` and `hi`.
pub fn mel_center_frequencies(count: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::invalid(format!("need at least two bands, got {count}")));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("bad frequency range {lo}..{hi}")));
    }
    let (m0, m1) = (mel(lo), mel(hi));
    let step = (m1 - m0) / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count).map(|i| mel_inv(m0 + step * i as f64)).collect();
    out[0] = lo;
    out[count - 1] = hi;
    Ok(out)
}

/// Normal-hearing equivalent rectangular bandwidth, Hz.
pub fn erb_bandwidth(f: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::invalid(format!("ERB needs a positive frequency, got {f}")));
    }
    Ok(24.7 * (4.37 * f / 1000.0 + 1.0))
}

/// Bandwidth broadened by outer-hair-cell loss `attn_o` (0..=50 dB).
pub fn impaired_bandwidth(attn_o: f64, b_nh: f64) -> Result<f64> {
    if !(0.0..=50.0).contains(&attn_o) {
        return Err(Error::invalid(format!("OHC attenuation {attn_o} dB outside [0, 50]")));
    }
    let r = attn_o / 50.0;
    Ok((1.0 + r + 2.0 * r.powi(6)) * b_nh)
}

/// Control-filter centre: the analysis centre moved basally along the
/// Greenwood frequency-position map.
pub fn control_center_freq(f_a: f64) -> Result<f64> {
    if !(f_a > 0.0) {
        return Err(Error::invalid(format!("centre frequency must be positive, got {f_a}")));
    }
    Ok(165.4 * (10f64.powf((1.0 + CONTROL_SHIFT) * (1.0 + f_a / 165.4).log10()) - 1.0))
}

/// Fourth-order FIR gammatone with a quadrature (sine) twin.
///
/// `taps_cos` is the real gammatone, `taps_sin` its sine-phase partner; together
/// they form the complex filter `g = cos + i sin` whose output modulus is the
/// band envelope. The amplitude is set so that a tone at `fc` of amplitude
/// `a` yields an envelope of `a`, i.e. `|G(fc)| / 2 = 1`.
#[derive(Debug, Clone)]
pub struct GammatoneFilter {
    pub fc: f64,
    pub bw: f64,
    pub rate: f64,
    pub amplitude: f64,
    taps_cos: Vec<f64>,
    taps_sin: Vec<f64>,
    delay: usize,
}

pub fn make_gammatone(fc: f64, bw: f64, rate: f64) -> Result<GammatoneFilter> {
    if !(rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if !(fc > 0.0 && fc < rate / 2.0) {
        return Err(Error::invalid(format!("centre {fc} Hz outside (0, {}) Hz", rate / 2.0)));
    }
    if !(bw > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bw}")));
    }
    let taps = (GAMMATONE_TAPS_24K as f64 * rate / 24_000.0).round() as usize;
    let envelope: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 / rate;
            t.powi(ORDER - 1) * (-2.0 * PI * bw * t).exp()
        })
        .collect();
    // DTFT of the complex filter at fc is A * sum(envelope).
    let amplitude = 2.0 / envelope.iter().sum::<f64>();
    let (taps_cos, taps_sin) = envelope
        .iter()
        .enumerate()
        .map(|(n, e)| {
            let ph = 2.0 * PI * fc * n as f64 / rate;
            (amplitude * e * ph.cos(), amplitude * e * ph.sin())
        })
        .unzip();
    let delay =
        envelope.iter().enumerate().fold((0, f64::MIN), |best, (n, &e)| if e > best.1 { (n, e) } else { best }).0;
    Ok(GammatoneFilter { fc, bw, rate, amplitude, taps_cos, taps_sin, delay })
}

impl GammatoneFilter {
    pub fn taps_cos(&self) -> &[f64] {
        &self.taps_cos
    }

    pub fn taps_sin(&self) -> &[f64] {
        &self.taps_sin
    }

    pub fn len(&self) -> usize {
        self.taps_cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps_cos.is_empty()
    }

    /// Samples of latency removed when filtering (peak of the tap envelope
    /// unless overridden).
    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn with_delay(mut self, delay: usize) -> Self {
        assert!(delay < self.len());
        self.delay = delay;
        self
    }

    pub fn complex_taps(&self) -> Vec<Complex64> {
        self.taps_cos.iter().zip(&self.taps_sin).map(|(&c, &s)| Complex64::new(c, s)).collect()
    }

    /// Envelope gain for a tone at `f`: `|G(f)| / 2`.
    pub fn response(&self, f: f64) -> f64 {
        let w = -2.0 * PI * f / self.rate;
        let sum = self
            .complex_taps()
            .iter()
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (n, g)| acc + g * Complex64::from_polar(1.0, w * n as f64));
        sum.norm() / 2.0
    }
}

/// Per-sample envelope `sqrt(y_cos^2 + y_sin^2)` with the filter's delay removed.
pub fn band_envelope(sig: &Signal, filt: &GammatoneFilter) -> Result<Vec<f64>> {
    if sig.rate() != filt.rate {
        return Err(Error::invalid(format!("signal rate {} does not match filter rate {}", sig.rate(), filt.rate)));
    }
    if sig.is_empty() {
        return Ok(Vec::new());
    }
    let plan = SpectralPlan::for_linear(sig.len(), filt.len());
    let xs = plan.forward_real(sig.samples());
    let hs = plan.forward_complex(&filt.complex_taps());
    Ok(plan.filter(&xs, &hs, filt.delay(), sig.len()).iter().map(|z| z.norm()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_endpoints_and_spacing() {
        let c = mel_center_frequencies(32, 80.0, 8000.0).unwrap();
        assert_eq!(c[0], 80.0);
        assert_eq!(c[31], 8000.0);
        let steps: Vec<f64> = c.windows(2).map(|w| mel(w[1]) - mel(w[0])).collect();
        for s in &steps {
            assert!((s - steps[0]).abs() < 1e-9);
        }
        // mel midpoint of 80 Hz and 8 kHz, evaluated independently
        let mid = mel_center_frequencies(3, 80.0, 8000.0).unwrap()[1];
        assert!((mid - 1904.9952015310896).abs() < 1e-6, "{mid}");
        assert!(mel_center_frequencies(1, 80.0, 8000.0).is_err());
    }

    #[test]
    fn erb_values() {
        assert!((erb_bandwidth(1000.0).unwrap() - 132.639).abs() < 1e-9);
        assert!((erb_bandwidth(1e-9).unwrap() - 24.7).abs() < 1e-6);
        assert!(erb_bandwidth(0.0).is_err());
        assert!(erb_bandwidth(2000.0).unwrap() > erb_bandwidth(1000.0).unwrap());
    }

    #[test]
    fn impaired_bandwidth_values() {
        assert_eq!(impaired_bandwidth(0.0, 100.0).unwrap(), 100.0);
        assert!((impaired_bandwidth(50.0, 100.0).unwrap() - 400.0).abs() < 1e-12);
        assert!((impaired_bandwidth(25.0, 1.0).unwrap() - 1.53125).abs() < 1e-12);
        assert!(impaired_bandwidth(50.1, 1.0).is_err());
        assert!(impaired_bandwidth(-1.0, 1.0).is_err());
    }

    #[test]
    fn control_centre_shift() {
        assert!((control_center_freq(1000.0).unwrap() - 1046.4079683873235).abs() < 1e-9);
        assert!(control_center_freq(1e-9).unwrap() < 1e-8);
        for f in [10.0, 80.0, 500.0, 4000.0, 8000.0] {
            assert!(control_center_freq(f).unwrap() > f);
        }
        assert!(control_center_freq(0.0).is_err());
    }

    #[test]
    fn gammatone_basics() {
        let g = make_gammatone(1000.0, 132.639, 24_000.0).unwrap();
        assert_eq!(g.len(), 2048);
        assert_eq!(g.taps_cos()[0], 0.0);
        assert_eq!(g.taps_sin()[0], 0.0);
        assert!((20.0 * g.response(1000.0).log10()).abs() < 0.1);
        for f in [1000.0 - 132.639, 1000.0 + 132.639] {
            assert!(20.0 * g.response(f).log10() <= -3.0);
        }
        assert!(make_gammatone(12_000.0, 100.0, 24_000.0).is_err());
        assert!(make_gammatone(1000.0, 0.0, 24_000.0).is_err());
    }

    #[test]
    fn gammatone_taps_decay() {
        // narrowest filter in the model
        let bw = erb_bandwidth(80.0).unwrap();
        let g = make_gammatone(80.0, bw, 24_000.0).unwrap();
        let env: Vec<f64> = g.taps_cos().iter().zip(g.taps_sin()).map(|(c, s)| c.hypot(*s)).collect();
        let peak = env.iter().cloned().fold(0.0, f64::max);
        assert!(20.0 * (env[env.len() - 1] / peak).log10() < -60.0);
    }

    fn tone(f: f64, phase: f64, amp: f64, n: usize) -> Signal {
        Signal::new((0..n).map(|i| amp * (2.0 * PI * f * i as f64 / 24_000.0 + phase).cos()).collect(), 24_000.0)
            .unwrap()
    }

    #[test]
    fn envelope_of_tone() {
        let g = make_gammatone(1000.0, erb_bandwidth(1000.0).unwrap(), 24_000.0).unwrap();
        let e0 = band_envelope(&tone(1000.0, 0.0, 0.7, 12_000), &g).unwrap();
        let e1 = band_envelope(&tone(1000.0, 1.1, 0.7, 12_000), &g).unwrap();
        for n in 3000..9000 {
            assert!((e0[n] - 0.7).abs() < 0.05 * 0.7, "{}", e0[n]);
            assert!((e0[n] - e1[n]).abs() < 0.01 * e0[n]);
        }
        let z = band_envelope(&Signal::zeros(100, 24_000.0).unwrap(), &g).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }
}
