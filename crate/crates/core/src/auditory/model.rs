use std::f64::consts::LN_10;

use rustfft::num_complex::Complex64;

use super::compression::{CompressionSchedule, THETA_HIGH_DB};
use super::filters::{
    control_center_freq, erb_bandwidth, impaired_bandwidth, make_gammatone, mel_center_frequencies, GammatoneFilter,
};
use super::{interpolate_audiogram, split_ohc_ihc, Audiogram, BandLoss, BANDS, HIGHEST_CENTER_HZ, LOWEST_CENTER_HZ};
use crate::dsp::fft::SpectralPlan;
use crate::dsp::{FrameSmoother, FramedEnvelope, Signal, ENVELOPE_FLOOR, REFERENCE_SPL_DB};
use crate::{Error, Result, MODEL_RATE};

/// Maximum OHC attenuation; sets the control filter width.
const MAX_ATTN_O_DB: f64 = 50.0;

/// d(10 log10 p)/dp = DB_POWER / p, and the factor 2 of |z|^2 folded in.
const DB_SLOPE: f64 = 20.0 / LN_10;

/// Everything one auditory band needs at run time.
#[derive(Debug, Clone)]
pub struct Band {
    pub center: f64,
    pub analysis: GammatoneFilter,
    pub control: GammatoneFilter,
    pub attn_o: f64,
    pub attn_i: f64,
    /// Compression ratio after OHC damage.
    pub ratio: f64,
    pub theta_low: f64,
    pub theta_high: f64,
}

#[derive(Debug, Clone)]
pub struct AuditoryModel {
    audiogram: Audiogram,
    loss: BandLoss,
    schedule: CompressionSchedule,
    bands: Vec<Band>,
    rate: f64,
}

impl AuditoryModel {
    /// Hearing-impaired model for `ag`; the all-zero audiogram gives the
    /// normal-hearing model.
    pub fn new(ag: &Audiogram) -> Result<Self> {
        let rate = MODEL_RATE;
        let centers = mel_center_frequencies(BANDS, LOWEST_CENTER_HZ, HIGHEST_CENTER_HZ)?;
        let schedule = CompressionSchedule::new(BANDS)?;
        let loss = split_ohc_ihc(&interpolate_audiogram(ag, &centers), &schedule)?;
        let bands = centers
            .iter()
            .enumerate()
            .map(|(i, &fc)| {
                let attn_o = loss.attn_o[i];
                let b_nh = erb_bandwidth(fc)?;
                // Latency is taken from the normal-hearing filter so the NH and HI
                // outputs of a band stay aligned in time.
                let nh_delay = make_gammatone(fc, b_nh, rate)?.delay();
                let analysis = make_gammatone(fc, impaired_bandwidth(attn_o, b_nh)?, rate)?.with_delay(nh_delay);
                let fc_ctrl = control_center_freq(fc)?;
                let control =
                    make_gammatone(fc_ctrl, impaired_bandwidth(MAX_ATTN_O_DB, erb_bandwidth(fc_ctrl)?)?, rate)?;
                Ok(Band {
                    center: fc,
                    analysis,
                    control,
                    attn_o,
                    attn_i: loss.attn_i[i],
                    ratio: schedule.effective_ratio(i, attn_o),
                    theta_low: CompressionSchedule::theta_low(attn_o),
                    theta_high: THETA_HIGH_DB,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { audiogram: ag.clone(), loss, schedule, bands, rate })
    }

    pub fn normal_hearing() -> Self {
        Self::new(&Audiogram::zero()).expect("normal-hearing model parameters are valid")
    }

    pub fn audiogram(&self) -> &Audiogram {
        &self.audiogram
    }

    pub fn loss(&self) -> &BandLoss {
        &self.loss
    }

    pub fn schedule(&self) -> &CompressionSchedule {
        &self.schedule
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn longest_filter(&self) -> usize {
        self.bands.iter().map(|b| b.analysis.len().max(b.control.len())).max().unwrap_or(1)
    }

    /// Precomputes filter spectra for signals of exactly `len` samples.
    pub fn plan(&self, len: usize) -> Result<ModelPlan<'_>> {
        let smoother = FrameSmoother::for_rate(self.rate)?;
        if smoother.frame_count(len).is_none() {
            return Err(Error::degenerate(format!(
                "{len} samples is shorter than one {}-sample smoothing window",
                smoother.window()
            )));
        }
        let spectral = SpectralPlan::for_linear(len, self.longest_filter());
        let analysis = self.bands.iter().map(|b| spectral.forward_complex(&b.analysis.complex_taps())).collect();
        let control = self.bands.iter().map(|b| spectral.forward_complex(&b.control.complex_taps())).collect();
        Ok(ModelPlan { model: self, spectral, analysis, control, smoother, len })
    }

    /// Framed dB envelopes of `sig` (24 kHz, RMS 1 = 65 dB SPL).
    pub fn process(&self, sig: &Signal) -> Result<FramedEnvelope> {
        self.check_rate(sig)?;
        self.plan(sig.len())?.forward(sig.samples())
    }

    fn check_rate(&self, sig: &Signal) -> Result<()> {
        if sig.rate() != self.rate {
            return Err(Error::invalid(format!(
                "auditory model runs at {} Hz, signal is {} Hz",
                self.rate,
                sig.rate()
            )));
        }
        Ok(())
    }
}

/// An [`AuditoryModel`] bound to a fixed signal length, with the filter
/// spectra cached.
pub struct ModelPlan<'a> {
    model: &'a AuditoryModel,
    spectral: SpectralPlan,
    analysis: Vec<Vec<Complex64>>,
    control: Vec<Vec<Complex64>>,
    smoother: FrameSmoother,
    len: usize,
}

/// Per-band sensitivities recorded on the forward pass: the complex
/// cotangents of the analysis and control filter outputs per unit change of
/// the per-sample dB level.
pub struct ModelTrace {
    analysis: Vec<Vec<Complex64>>,
    control: Vec<Vec<Complex64>>,
}

impl<'a> ModelPlan<'a> {
    pub fn model(&self) -> &AuditoryModel {
        self.model
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn frames(&self) -> usize {
        self.smoother.frame_count(self.len).expect("checked in plan()")
    }

    pub fn forward(&self, x: &[f64]) -> Result<FramedEnvelope> {
        Ok(self.run(x, false)?.0)
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<(FramedEnvelope, ModelTrace)> {
        let (env, trace) = self.run(x, true)?;
        Ok((env, trace.expect("trace requested")))
    }

    fn run(&self, x: &[f64], keep: bool) -> Result<(FramedEnvelope, Option<ModelTrace>)> {
        if x.len() != self.len {
            return Err(Error::invalid(format!("plan is for {} samples, got {}", self.len, x.len())));
        }
        let xs = self.spectral.forward_real(x);
        let mut frames = Vec::with_capacity(self.model.bands.len());
        let mut trace = keep.then(|| ModelTrace { analysis: Vec::new(), control: Vec::new() });
        for (i, band) in self.model.bands.iter().enumerate() {
            let za = self.spectral.filter(&xs, &self.analysis[i], band.analysis.delay(), self.len);
            let zc = self.spectral.filter(&xs, &self.control[i], band.control.delay(), self.len);
            let mut levels = Vec::with_capacity(self.len);
            let (mut pa, mut pc) = if keep {
                (Vec::with_capacity(self.len), Vec::with_capacity(self.len))
            } else {
                (Vec::new(), Vec::new())
            };
            for (a, c) in za.iter().zip(&zc) {
                let s = band.sample(*a, *c);
                levels.push(s.level);
                if keep {
                    pa.push(*a * s.d_analysis);
                    pc.push(*c * s.d_control);
                }
            }
            crate::error::ensure_finite("auditory band levels", &levels)?;
            frames.push(self.smoother.smooth(&levels)?);
            if let Some(t) = trace.as_mut() {
                t.analysis.push(pa);
                t.control.push(pc);
            }
        }
        let env = FramedEnvelope::new(frames, self.model.rate / self.smoother.hop() as f64)?;
        Ok((env, trace))
    }

    /// Gradient of a scalar w.r.t. the input samples given its gradient
    /// w.r.t. the framed envelope.
    pub fn backward(&self, trace: &ModelTrace, env_grad: &[Vec<f64>]) -> Result<Vec<f64>> {
        if env_grad.len() != self.model.bands.len() {
            return Err(Error::invalid("envelope gradient has the wrong band count"));
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); self.spectral.len()];
        for (i, band) in self.model.bands.iter().enumerate() {
            let level_grad = self.smoother.adjoint(&env_grad[i], self.len);
            let za_bar: Vec<Complex64> = trace.analysis[i].iter().zip(&level_grad).map(|(p, g)| p * *g).collect();
            let zc_bar: Vec<Complex64> = trace.control[i].iter().zip(&level_grad).map(|(p, g)| p * *g).collect();
            self.spectral.accumulate_adjoint(&mut acc, &za_bar, &self.analysis[i], band.analysis.delay());
            self.spectral.accumulate_adjoint(&mut acc, &zc_bar, &self.control[i], band.control.delay());
        }
        let grad = self.spectral.finish_adjoint(acc, self.len);
        crate::error::ensure_finite("auditory model backward", &grad)?;
        Ok(grad)
    }
}

struct SampleOut {
    level: f64,
    /// d level / d z_a as a multiplier of z_a (cotangent convention).
    d_analysis: f64,
    d_control: f64,
}

impl Band {
    /// One sample of the band: compression from the control output, applied
    /// to the analysis envelope, in dB SPL minus the IHC loss.
    #[inline]
    fn sample(&self, za: Complex64, zc: Complex64) -> SampleOut {
        let floor_db = 20.0 * ENVELOPE_FLOOR.log10();
        let pa = za.norm_sqr();
        let pc = zc.norm_sqr();
        let ctrl_rel = 10.0 * pc.log10();
        let ctrl_on_floor = ctrl_rel >= floor_db;
        let e_c = REFERENCE_SPL_DB + if ctrl_on_floor { ctrl_rel } else { floor_db };
        let clipped = e_c.min(self.theta_high).max(self.theta_low);
        let slope = 1.0 - 1.0 / self.ratio;
        let gain = -self.attn_o - slope * (self.theta_low - clipped);
        let compressed = 10.0 * pa.log10() + gain;
        if compressed >= floor_db {
            let clip_active = e_c >= self.theta_low && e_c <= self.theta_high;
            SampleOut {
                level: REFERENCE_SPL_DB + compressed - self.attn_i,
                d_analysis: DB_SLOPE / pa,
                d_control: if clip_active && ctrl_on_floor { slope * DB_SLOPE / pc } else { 0.0 },
            }
        } else {
            SampleOut { level: REFERENCE_SPL_DB + floor_db - self.attn_i, d_analysis: 0.0, d_control: 0.0 }
        }
    }
}
