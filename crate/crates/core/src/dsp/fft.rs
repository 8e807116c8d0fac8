//! FFT plumbing for linear (non-circular) convolution and its adjoint.
//!
//! A "same" convolution with offset `d` keeps samples `d..d+len` of the full
//! linear convolution. With transforms of size `n >= len + taps - 1` there is
//! no wrap-around, so
//!
//! ```text
//! y     = slice(IFFT(FFT(x) * G), d, len)
//! x_bar = Re IFFT(FFT(place(y_bar, d)) * conj(G))[..len]
//! ```
//!
//! where `y_bar` is the complex cotangent `dL/dRe y + i dL/dIm y`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct SpectralPlan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("n", &self.n).finish()
    }
}

impl SpectralPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    /// Smallest power-of-two plan that holds a linear convolution of
    /// `len` samples with `taps` taps.
    pub fn for_linear(len: usize, taps: usize) -> Self {
        Self::new((len + taps - 1).next_power_of_two())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        assert!(x.len() <= self.n, "input longer than transform");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        buf
    }

    /// Forward transform of `x` placed at offset `at` in a zero buffer.
    pub fn forward_placed(&self, x: &[Complex64], at: usize) -> Vec<Complex64> {
        assert!(at + x.len() <= self.n, "placed input exceeds transform");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        buf[at..at + x.len()].copy_from_slice(x);
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.forward_placed(x, 0)
    }

    /// Normalised inverse transform (includes the 1/n factor).
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        assert_eq!(spec.len(), self.n);
        self.inv.process(&mut spec);
        let scale = 1.0 / self.n as f64;
        for v in &mut spec {
            *v *= scale;
        }
        spec
    }

    /// "Same" filtering of a signal spectrum with a filter spectrum.
    pub fn filter(&self, x_spec: &[Complex64], h_spec: &[Complex64], offset: usize, len: usize) -> Vec<Complex64> {
        let prod = x_spec.iter().zip(h_spec).map(|(a, b)| a * b).collect();
        let full = self.inverse(prod);
        full[offset..offset + len].to_vec()
    }

    /// Spectral contribution of one filter's adjoint. Accumulate these over
    /// filters and finish with [`finish_adjoint`](Self::finish_adjoint).
    pub fn accumulate_adjoint(&self, acc: &mut [Complex64], y_bar: &[Complex64], h_spec: &[Complex64], offset: usize) {
        let yb = self.forward_placed(y_bar, offset);
        for ((a, y), h) in acc.iter_mut().zip(&yb).zip(h_spec) {
            *a += y * h.conj();
        }
    }

    pub fn finish_adjoint(&self, acc: Vec<Complex64>, len: usize) -> Vec<f64> {
        self.inverse(acc)[..len].iter().map(|c| c.re).collect()
    }
}
