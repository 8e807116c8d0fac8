use rustfft::num_complex::Complex64;

use super::fft::SpectralPlan;
use super::Signal;
use crate::{Error, Result};

/// Above this many multiply-adds the FFT route is used.
const DIRECT_LIMIT: usize = 1 << 20;

/// Causal FIR filtering truncated to the input length:
/// `y[n] = sum_j k[j] x[n - j]`.
pub fn fir_convolve(sig: &Signal, coeffs: &[f64]) -> Result<Signal> {
    fir_convolve_aligned(sig, coeffs, 0)
}

/// FIR filtering with `delay` samples of latency removed:
/// `y[n] = sum_j k[j] x[n + delay - j]`, `x` zero outside its support.
///
/// For a linear-phase filter of length `2 D + 1` (or `2 D` with a zero first
/// tap) passing `delay = D` gives a zero-latency output.
pub fn fir_convolve_aligned(sig: &Signal, coeffs: &[f64], delay: usize) -> Result<Signal> {
    if coeffs.is_empty() {
        return Err(Error::invalid("empty FIR coefficient list"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite FIR coefficient"));
    }
    if delay >= coeffs.len() {
        return Err(Error::invalid(format!("delay {delay} exceeds filter length {}", coeffs.len())));
    }
    let x = sig.samples();
    let y = if x.len().saturating_mul(coeffs.len()) <= DIRECT_LIMIT {
        direct(x, coeffs, delay)
    } else {
        let plan = SpectralPlan::for_linear(x.len(), coeffs.len());
        let xs = plan.forward_real(x);
        let hs = plan.forward_real(coeffs);
        plan.filter(&xs, &hs, delay, x.len()).iter().map(|c: &Complex64| c.re).collect()
    };
    Signal::new(y, sig.rate())
}

fn direct(x: &[f64], k: &[f64], delay: usize) -> Vec<f64> {
    let len = x.len() as isize;
    (0..len)
        .map(|n| {
            let base = n + delay as isize;
            let lo = (base - len + 1).max(0) as usize;
            let hi = (base as usize).min(k.len() - 1);
            (lo..=hi).map(|j| k[j] * x[(base - j as isize) as usize]).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(v: Vec<f64>) -> Signal {
        Signal::new(v, 24_000.0).unwrap()
    }

    #[test]
    fn identity_and_scaling() {
        let x = sig(vec![1.0, -2.0, 3.5, 0.25]);
        assert_eq!(fir_convolve(&x, &[1.0]).unwrap(), x);
        let y = fir_convolve(&x, &[0.5]).unwrap();
        assert_eq!(y.samples(), &[0.5, -1.0, 1.75, 0.125]);
    }

    #[test]
    fn impulse_response() {
        let mut imp = vec![0.0; 8];
        imp[0] = 1.0;
        let k = [0.3, -0.1, 0.7];
        let y = fir_convolve(&sig(imp), &k).unwrap();
        assert_eq!(y.samples(), &[0.3, -0.1, 0.7, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn aligned_delay_centres_symmetric_filter() {
        let mut imp = vec![0.0; 9];
        imp[4] = 1.0;
        let y = fir_convolve_aligned(&sig(imp), &[0.25, 0.5, 0.25], 1).unwrap();
        assert_eq!(&y.samples()[3..6], &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn empty_coeffs_rejected() {
        assert!(matches!(fir_convolve(&sig(vec![1.0]), &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fft_route_matches_direct() {
        let x: Vec<f64> = (0..3000).map(|n| ((n * 31) % 17) as f64 - 8.0).collect();
        let k: Vec<f64> = (0..400).map(|j| (j as f64 * 0.01).cos()).collect();
        let fast = fir_convolve_aligned(&sig(x.clone()), &k, 200).unwrap();
        let slow = direct(&x, &k, 200);
        for (a, b) in fast.samples().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn linear_in_signal(
            x in prop::collection::vec(-1.0f64..1.0, 32),
            y in prop::collection::vec(-1.0f64..1.0, 32),
            k in prop::collection::vec(-1.0f64..1.0, 1..8),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = fir_convolve(&sig(mix), &k).unwrap();
            let fx = fir_convolve(&sig(x), &k).unwrap();
            let fy = fir_convolve(&sig(y), &k).unwrap();
            for ((l, p), q) in lhs.samples().iter().zip(fx.samples()).zip(fy.samples()) {
                let r = a * p + b * q;
                prop_assert!((l - r).abs() <= 1e-10 * (1.0 + r.abs()));
            }
        }
    }
}
