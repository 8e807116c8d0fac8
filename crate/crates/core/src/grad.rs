//! Reverse-mode gradient of the fitting loss w.r.t. the six processor gains,
//! and a central finite-difference verifier.
//!
//! The graph is fixed: gains -> FIR taps -> aligned convolution -> impaired
//! auditory model -> loss against a cached normal-hearing reference. Each
//! stage supplies a hand-written adjoint; the finite-difference check is the
//! contract that keeps them honest.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use crate::auditory::{AuditoryModel, ModelPlan};
use crate::dsp::fft::SpectralPlan;
use crate::dsp::FramedEnvelope;
use crate::error::ensure_finite;
use crate::objective::{LossBreakdown, Objective};
use crate::processor::{FilterSource, FirDesigner, GainParams};
use crate::{Error, Result, AUDIOGRAM_FREQS};

/// Gains whose analytic and numeric derivatives are both below this are
/// compared absolutely.
pub const ABSOLUTE_FLOOR: f64 = 1e-8;
pub const DEFAULT_STEP_DB: f64 = 1e-3;
/// Largest relative error a gradient check accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;
pub const FD_CSV_HEADER: &str = "frequency_hz,analytic,numeric,error,mode";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientResult {
    /// dL/dgain_k in loss per dB.
    pub grad: [f64; 6],
    pub loss: f64,
}

/// A scalar loss of the six gains with a reverse-mode gradient.
pub trait DifferentiableScalarFn {
    fn eval(&self, p: &GainParams) -> Result<f64>;
    fn gradient(&self, p: &GainParams) -> Result<GradientResult>;
}

pub fn gradient<F: DifferentiableScalarFn + ?Sized>(f: &F, p: &GainParams) -> Result<GradientResult> {
    let g = f.gradient(p)?;
    ensure_finite("gain gradient", &g.grad)?;
    ensure_finite("loss", &[g.loss])?;
    Ok(g)
}

/// Shared normal-hearing model; it never changes, so it is built once.
pub fn normal_hearing_model() -> &'static AuditoryModel {
    static NH: OnceLock<AuditoryModel> = OnceLock::new();
    NH.get_or_init(AuditoryModel::normal_hearing)
}

/// Everything about the pipeline that is fixed for a segment length and a
/// listener: filter spectra, the FIR designer and the loss settings.
pub struct Pipeline<'m> {
    hi: ModelPlan<'m>,
    nh: ModelPlan<'static>,
    designer: FirDesigner,
    conv: SpectralPlan,
    objective: Objective,
    len: usize,
}

/// One input segment with its transform and normal-hearing envelopes.
#[derive(Debug, Clone)]
pub struct Segment {
    samples: Vec<f64>,
    spectrum: Vec<Complex64>,
    reference: FramedEnvelope,
}

impl Segment {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn reference(&self) -> &FramedEnvelope {
        &self.reference
    }
}

impl<'m> Pipeline<'m> {
    pub fn new(hi: &'m AuditoryModel, len: usize, objective: Objective) -> Result<Self> {
        let designer = FirDesigner::new(crate::processor::PROCESSOR_TAPS, hi.rate())?;
        Self::with_designer(hi, len, objective, designer)
    }

    pub fn with_designer(
        hi: &'m AuditoryModel,
        len: usize,
        objective: Objective,
        designer: FirDesigner,
    ) -> Result<Self> {
        let nh_model = normal_hearing_model();
        if nh_model.rate() != hi.rate() || designer.rate() != hi.rate() {
            return Err(Error::invalid("pipeline stages run at different rates"));
        }
        if len <= designer.taps() / 2 {
            return Err(Error::invalid(format!("segment of {len} samples is shorter than the processor latency")));
        }
        Ok(Self {
            hi: hi.plan(len)?,
            nh: nh_model.plan(len)?,
            conv: SpectralPlan::for_linear(len, designer.taps()),
            designer,
            objective,
            len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn designer(&self) -> &FirDesigner {
        &self.designer
    }

    /// Transforms `x` and caches its normal-hearing envelopes.
    pub fn prepare(&self, x: &[f64]) -> Result<Segment> {
        if x.len() != self.len {
            return Err(Error::invalid(format!("pipeline is for {} samples, got {}", self.len, x.len())));
        }
        ensure_finite("input segment", x)?;
        Ok(Segment { samples: x.to_vec(), spectrum: self.conv.forward_real(x), reference: self.nh.forward(x)? })
    }

    fn process(&self, seg: &Segment, p: &GainParams) -> Result<Vec<f64>> {
        let taps = self.designer.design(p, FilterSource::Trained).coeffs;
        let h = self.conv.forward_real(&taps);
        let y: Vec<f64> = self.conv.filter(&seg.spectrum, &h, taps.len() / 2, self.len).iter().map(|c| c.re).collect();
        ensure_finite("processor output", &y)?;
        Ok(y)
    }

    /// Impaired-model envelopes of the processed segment.
    pub fn processed_envelope(&self, seg: &Segment, p: &GainParams) -> Result<FramedEnvelope> {
        self.hi.forward(&self.process(seg, p)?)
    }

    pub fn breakdown(&self, seg: &Segment, p: &GainParams) -> Result<LossBreakdown> {
        let ep = self.processed_envelope(seg, p)?;
        self.objective.evaluate(&seg.reference, &ep)
    }

    /// Loss breakdown and gain gradient for one segment.
    pub fn gradient(&self, seg: &Segment, p: &GainParams) -> Result<(LossBreakdown, [f64; 6])> {
        let xp = self.process(seg, p)?;
        let (ep, trace) = self.hi.forward_traced(&xp)?;
        let (loss, env_grad) = self.objective.evaluate_with_grad(&seg.reference, &ep)?;
        let xp_bar = self.hi.backward(&trace, &env_grad)?;
        // y[n] = sum_j h[j] x[n + d - j]  =>  h_bar[j] = sum_n y_bar[n] x[n + d - j]
        let delay = self.designer.taps() / 2;
        let yb: Vec<Complex64> = xp_bar.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let spec = self.conv.forward_placed(&yb, delay);
        let corr = spec.iter().zip(&seg.spectrum).map(|(a, b)| a * b.conj()).collect();
        let h_bar: Vec<f64> = self.conv.inverse(corr)[..self.designer.taps()].iter().map(|c| c.re).collect();
        ensure_finite("processor tap gradient", &h_bar)?;
        let grad = self.designer.backward(p, &h_bar);
        ensure_finite("gain gradient", &grad)?;
        Ok((loss, grad))
    }

    pub fn bind<'p>(&'p self, seg: &'p Segment) -> SegmentLoss<'p, 'm> {
        SegmentLoss { pipeline: self, segment: seg }
    }
}

/// The pipeline loss on one fixed segment.
pub struct SegmentLoss<'p, 'm> {
    pipeline: &'p Pipeline<'m>,
    segment: &'p Segment,
}

impl DifferentiableScalarFn for SegmentLoss<'_, '_> {
    fn eval(&self, p: &GainParams) -> Result<f64> {
        Ok(self.pipeline.breakdown(self.segment, p)?.total)
    }

    fn gradient(&self, p: &GainParams) -> Result<GradientResult> {
        let (loss, grad) = self.pipeline.gradient(self.segment, p)?;
        Ok(GradientResult { grad, loss: loss.total })
    }
}

/// One row of the finite-difference table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateCheck {
    pub analytic: f64,
    pub numeric: f64,
    /// Relative error, or absolute error when both values are below
    /// [`ABSOLUTE_FLOOR`].
    pub error: f64,
    pub absolute: bool,
}

impl CoordinateCheck {
    fn new(analytic: f64, numeric: f64) -> Self {
        let scale = analytic.abs().max(numeric.abs());
        let diff = (analytic - numeric).abs();
        if scale < ABSOLUTE_FLOOR {
            Self { analytic, numeric, error: diff, absolute: true }
        } else {
            Self { analytic, numeric, error: diff / scale, absolute: false }
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        if self.absolute {
            self.error < ABSOLUTE_FLOOR
        } else {
            self.error < tol
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub step: f64,
    pub loss: f64,
    pub coords: [CoordinateCheck; 6],
}

impl FdReport {
    /// Largest relative error over the coordinates compared relatively.
    pub fn max_error(&self) -> f64 {
        self.coords.iter().filter(|c| !c.absolute).map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.coords.iter().all(|c| c.passes(tol))
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{FD_CSV_HEADER}\n");
        for (f, c) in AUDIOGRAM_FREQS.iter().zip(&self.coords) {
            let mode = if c.absolute { "absolute" } else { "relative" };
            let _ = writeln!(s, "{f},{:e},{:e},{:e},{mode}", c.analytic, c.numeric, c.error);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Compares `f.gradient` at `p` with central differences of `f.eval`.
pub fn finite_difference_check<F: DifferentiableScalarFn + ?Sized>(
    f: &F,
    p: &GainParams,
    step: f64,
) -> Result<FdReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let g = gradient(f, p)?;
    let mut coords = [CoordinateCheck::new(0.0, 0.0); 6];
    for (k, c) in coords.iter_mut().enumerate() {
        let up = p.nudged(k, step)?;
        let down = p.nudged(k, -step)?;
        let width = up.values()[k] - down.values()[k];
        if width <= 0.0 {
            return Err(Error::invalid(format!("gain {k} is pinned at a rail; cannot difference")));
        }
        let numeric = (f.eval(&up)? - f.eval(&down)?) / width;
        *c = CoordinateCheck::new(g.grad[k], numeric);
    }
    Ok(FdReport { step, loss: g.loss, coords })
}
