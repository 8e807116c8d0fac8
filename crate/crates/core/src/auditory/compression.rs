use crate::{Error, Result};

/// Upper clipping level of the compressor input, dB SPL.
pub const THETA_HIGH_DB: f64 = 100.0;
/// Lower clipping level sits this far above the OHC attenuation, dB.
pub const THETA_LOW_OFFSET_DB: f64 = 30.0;

const RATIO_LOW: f64 = 1.25;
const RATIO_HIGH: f64 = 3.5;
const MAX_OHC_LOW: f64 = 14.0;
const MAX_OHC_HIGH: f64 = 50.0;

/// Per-band normal-hearing compression ratio and maximum OHC gain, both
/// linear in band index from the lowest to the highest band.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionSchedule {
    pub ratio: Vec<f64>,
    pub max_ohc_gain: Vec<f64>,
    pub theta_high: f64,
}

impl CompressionSchedule {
    pub fn new(bands: usize) -> Result<Self> {
        if bands < 2 {
            return Err(Error::invalid("compression schedule needs at least two bands"));
        }
        let lerp = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (bands - 1) as f64;
        Ok(Self {
            ratio: (0..bands).map(|i| lerp(RATIO_LOW, RATIO_HIGH, i)).collect(),
            max_ohc_gain: (0..bands).map(|i| lerp(MAX_OHC_LOW, MAX_OHC_HIGH, i)).collect(),
            theta_high: THETA_HIGH_DB,
        })
    }

    pub fn bands(&self) -> usize {
        self.ratio.len()
    }

    pub fn theta_low(attn_o: f64) -> f64 {
        attn_o + THETA_LOW_OFFSET_DB
    }

    /// Compression ratio after OHC damage: the compressive part `1 - 1/CR`
    /// shrinks in proportion to `attn_o / max_ohc_gain`, reaching 1:1 at
    /// full OHC loss. Zero loss leaves the normal ratio untouched.
    pub fn effective_ratio(&self, band: usize, attn_o: f64) -> f64 {
        let cr = self.ratio[band];
        let remaining = (1.0 - attn_o / self.max_ohc_gain[band]).clamp(0.0, 1.0);
        1.0 / (1.0 - (1.0 - 1.0 / cr) * remaining)
    }
}

/// Outer/inner hair-cell split of a per-band loss.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLoss {
    pub attn_o: Vec<f64>,
    pub attn_i: Vec<f64>,
    pub total: Vec<f64>,
}

/// Losses above `1.25 * max_ohc_gain` saturate the OHC share at
/// `max_ohc_gain`; otherwise 80% goes to OHC and 20% to IHC.
pub fn split_ohc_ihc(total_loss: &[f64], sched: &CompressionSchedule) -> Result<BandLoss> {
    if total_loss.len() != sched.bands() {
        return Err(Error::invalid(format!("{} band losses for a {}-band schedule", total_loss.len(), sched.bands())));
    }
    if let Some(l) = total_loss.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::invalid(format!("band loss must be non-negative, got {l}")));
    }
    let (attn_o, attn_i) = total_loss
        .iter()
        .zip(&sched.max_ohc_gain)
        .map(|(&loss, &gmax)| if loss > 1.25 * gmax { (gmax, loss - gmax) } else { (0.8 * loss, 0.2 * loss) })
        .unzip();
    Ok(BandLoss { attn_o, attn_i, total: total_loss.to_vec() })
}

/// Compression gain in dB for a control level `e_c` (dB SPL).
pub fn compression_gain(e_c: f64, attn_o: f64, cr: f64, theta_low: f64, theta_high: f64) -> Result<f64> {
    if !(cr >= 1.0) {
        return Err(Error::invalid(format!("compression ratio must be >= 1, got {cr}")));
    }
    if !(theta_low < theta_high) {
        return Err(Error::invalid(format!("theta_low {theta_low} must be below theta_high {theta_high}")));
    }
    let clipped = e_c.min(theta_high).max(theta_low);
    Ok(-attn_o - (1.0 - 1.0 / cr) * (theta_low - clipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = CompressionSchedule::new(32).unwrap();
        assert_eq!(s.ratio[0], 1.25);
        assert!((s.ratio[31] - 3.5).abs() < 1e-12);
        assert_eq!(s.max_ohc_gain[0], 14.0);
        assert!((s.max_ohc_gain[31] - 50.0).abs() < 1e-12);
        assert!(s.ratio.windows(2).all(|w| w[1] >= w[0]));
        assert!(s.max_ohc_gain.windows(2).all(|w| w[1] >= w[0]));
        assert!((s.effective_ratio(5, 0.0) - s.ratio[5]).abs() < 1e-12);
        assert!((s.effective_ratio(5, s.max_ohc_gain[5]) - 1.0).abs() < 1e-12);
        assert!(s.effective_ratio(5, 5.0) < s.ratio[5]);
    }

    #[test]
    fn ohc_ihc_split() {
        let mut s = CompressionSchedule::new(3).unwrap();
        s.max_ohc_gain = vec![14.0; 3];
        let l = split_ohc_ihc(&[0.0, 40.0, 10.0], &s).unwrap();
        assert_eq!(l.attn_o, vec![0.0, 14.0, 8.0]);
        assert_eq!(l.attn_i, vec![0.0, 26.0, 2.0]);
        for i in 0..3 {
            assert!((l.attn_o[i] + l.attn_i[i] - l.total[i]).abs() < 1e-9);
        }
        assert!(split_ohc_ihc(&[-1.0, 0.0, 0.0], &s).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(compression_gain(30.0, 0.0, 2.0, 30.0, 100.0).unwrap(), 0.0);
        assert!((compression_gain(100.0, 0.0, 2.0, 30.0, 100.0).unwrap() - 35.0).abs() < 1e-12);
        assert!((compression_gain(70.0, 20.0, 2.0, 50.0, 100.0).unwrap() + 10.0).abs() < 1e-12);
        assert!(compression_gain(70.0, 0.0, 0.9, 30.0, 100.0).is_err());
        assert!(compression_gain(70.0, 0.0, 2.0, 100.0, 100.0).is_err());
    }

    #[test]
    fn gain_is_piecewise_linear_and_flat_outside() {
        let g = |e| compression_gain(e, 5.0, 3.0, 35.0, 100.0).unwrap();
        assert_eq!(g(0.0), g(35.0));
        assert_eq!(g(150.0), g(100.0));
        let slope = (g(60.0) - g(50.0)) / 10.0;
        assert!((slope - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
    }
}
