//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.

use std::f64::consts::PI;

use super::Signal;
use crate::{Error, Result};

/// Stop-band attenuation of the anti-imaging/anti-aliasing filter, dB.
const STOPBAND_DB: f64 = 90.0;
/// Cutoff as a fraction of the lower of the two Nyquist rates.
const CUTOFF_FRACTION: f64 = 0.9375;

/// Band-limited rate conversion. Rates must be whole numbers of Hz.
///
/// The interpolation kernel is centred, so the output carries no latency:
/// output sample `m` is the band-limited input evaluated at time
/// `m / to_rate`.
pub fn resample(sig: &Signal, to_rate: f64) -> Result<Signal> {
    if !(to_rate > 0.0 && to_rate.is_finite()) {
        return Err(Error::invalid(format!("target rate must be positive, got {to_rate}")));
    }
    let from = sig.rate();
    if from == to_rate {
        return Ok(sig.clone());
    }
    if from.fract() != 0.0 || to_rate.fract() != 0.0 {
        return Err(Error::invalid("resampling needs integer sample rates"));
    }
    let (from_i, to_i) = (from as u64, to_rate as u64);
    let g = gcd(from_i, to_i);
    let (up, down) = ((to_i / g) as usize, (from_i / g) as usize);

    let kernel = Kernel::design(up, down);
    let x = sig.samples();
    let out_len = (x.len() * up).div_ceil(down);
    let y = (0..out_len).map(|m| kernel.eval(x, m)).collect();
    Signal::new(y, to_rate)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

struct Kernel {
    taps: Vec<f64>,
    centre: usize,
    up: usize,
    down: usize,
}

impl Kernel {
    fn design(up: usize, down: usize) -> Self {
        // Everything in units of the intermediate rate (input rate * up).
        let nyq_min = 0.5 / up.max(down) as f64;
        let cutoff = CUTOFF_FRACTION * nyq_min;
        let transition = 2.0 * (1.0 - CUTOFF_FRACTION) * nyq_min;
        let beta = 0.1102 * (STOPBAND_DB - 8.7);
        let order = ((STOPBAND_DB - 7.95) / (2.285 * 2.0 * PI * transition)).ceil() as usize;
        let half = order.div_ceil(2);
        let len = 2 * half + 1;
        let i0_beta = bessel_i0(beta);
        let taps = (0..len)
            .map(|k| {
                let t = k as f64 - half as f64;
                let r = t / half as f64;
                let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                2.0 * cutoff * sinc(2.0 * cutoff * t) * w * up as f64
            })
            .collect();
        Self { taps, centre: half, up, down }
    }

    fn eval(&self, x: &[f64], m: usize) -> f64 {
        // y[m] = sum_j x[j] h[centre + m*down - j*up]
        let pos = self.centre + m * self.down;
        let j_hi = (pos / self.up).min(x.len().saturating_sub(1));
        let j_lo = (pos + self.up).saturating_sub(self.taps.len()).div_ceil(self.up);
        if x.is_empty() || j_lo > j_hi {
            return 0.0;
        }
        (j_lo..=j_hi).map(|j| x[j] * self.taps[pos - j * self.up]).sum()
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half_sq = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= half_sq / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: f64, secs: f64, amp: f64) -> Signal {
        let n = (rate * secs) as usize;
        Signal::new((0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin()).collect(), rate).unwrap()
    }

    /// Amplitude of a known-frequency tone by least-squares projection on the
    /// steady-state middle portion.
    fn tone_amplitude(s: &Signal, freq: f64) -> f64 {
        let n = s.len();
        let (a, b) = (n / 4, 3 * n / 4);
        let (mut c, mut d) = (0.0, 0.0);
        for i in a..b {
            let ph = 2.0 * PI * freq * i as f64 / s.rate();
            c += s.samples()[i] * ph.cos();
            d += s.samples()[i] * ph.sin();
        }
        2.0 * (c * c + d * d).sqrt() / (b - a) as f64
    }

    #[test]
    fn tones_keep_their_level() {
        for f in [100.0, 1000.0, 3000.0, 7000.0] {
            let s = tone(f, 16_000.0, 0.5, 0.8);
            let r = resample(&s, 24_000.0).unwrap();
            assert_eq!(r.rate(), 24_000.0);
            assert_eq!(r.len(), 12_000);
            let db = 20.0 * (tone_amplitude(&r, f) / 0.8).log10();
            assert!(db.abs() < 0.1, "{f} Hz off by {db} dB");
        }
    }

    #[test]
    fn downsampling_keeps_level() {
        let s = tone(2000.0, 48_000.0, 0.5, 1.0);
        let r = resample(&s, 24_000.0).unwrap();
        assert_eq!(r.len(), 12_000);
        assert!(20.0 * tone_amplitude(&r, 2000.0).log10() < 0.1);
    }

    #[test]
    fn identity_and_zero() {
        let s = tone(440.0, 16_000.0, 0.1, 1.0);
        assert_eq!(resample(&s, 16_000.0).unwrap(), s);
        let z = Signal::zeros(1600, 16_000.0).unwrap();
        let r = resample(&z, 24_000.0).unwrap();
        assert_eq!(r.len(), 2400);
        assert!(r.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_rate() {
        let s = Signal::zeros(10, 16_000.0).unwrap();
        assert!(matches!(resample(&s, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(resample(&s, -5.0), Err(Error::InvalidArgument(_))));
    }
}
