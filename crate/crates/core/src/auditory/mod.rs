//! Differentiable normal-hearing / hearing-impaired auditory model.
//!
//! Per band: a wide control gammatone drives a level-dependent compression
//! gain, which scales the envelope of a narrower analysis gammatone. The
//! result is expressed in dB SPL, reduced by the inner-hair-cell loss and
//! smoothed into 8 ms frames. The normal-hearing model is simply the
//! impaired model evaluated at an all-zero audiogram.

mod audiogram;
mod compression;
mod filters;
mod model;

pub use audiogram::{interpolate_audiogram, Audiogram};
pub use compression::{compression_gain, split_ohc_ihc, BandLoss, CompressionSchedule};
pub use filters::{
    band_envelope, control_center_freq, erb_bandwidth, impaired_bandwidth, make_gammatone, mel_center_frequencies,
    GammatoneFilter, GAMMATONE_TAPS_24K,
};
pub use model::{AuditoryModel, Band, ModelPlan, ModelTrace};

/// Number of auditory bands.
pub const BANDS: usize = 32;
/// Lowest and highest band centre frequencies, Hz.
pub const LOWEST_CENTER_HZ: f64 = 80.0;
pub const HIGHEST_CENTER_HZ: f64 = 8000.0;
