//! Hearing-aid gain fitting by gradient descent through a differentiable
//! auditory model.
//!
//! A six-parameter linear-phase FIR hearing-aid processor is tuned so that a
//! hearing-impaired auditory model, fed the amplified signal, produces
//! envelopes whose cepstral modulation structure correlates with those of a
//! normal-hearing model fed the clean signal. A NAL-R prescription serves as
//! the baseline.
//!
//! Module map:
//!
//! - [`dsp`]: signal containers, resampling, convolution, framing, levels, WAV IO
//! - [`auditory`]: audiograms, gammatone filterbanks, compression, the model itself
//! - [`processor`]: trainable gain FIR and the NAL-R prescription
//! - [`objective`]: cepstral correlation, energy control loss, HASPI combination
//! - [`grad`]: reverse-mode gradient of the loss w.r.t. the six gains, plus a
//!   finite-difference verifier
//! - [`train`]: corpus indexing, segment sampling, Adam, the training loop, evaluation
//! - [`report`]: CSV/SVG emitters and run manifests
//! - [`synth`]: deterministic speech-like test material

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auditory;
pub mod dsp;
mod error;
pub mod grad;
pub mod objective;
pub mod processor;
pub mod report;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

/// Internal processing rate of the whole chain, Hz.
pub const MODEL_RATE: f64 = 24_000.0;

/// Audiogram / gain-anchor frequencies, Hz.
pub const AUDIOGRAM_FREQS: [f64; 6] = [250.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0];
