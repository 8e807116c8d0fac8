//! Training objective and the HASPI score combination.
//!
//! The loss compares reference (normal-hearing, clean) and processed
//! (hearing-impaired, aided) framed envelopes:
//!
//! ```text
//! L = -(1/5) sum_{j=2..6} R(j) + alpha * sum_{i,m} max(Ep - Er, 0)
//! ```
//!
//! where `R(j)` is the normalised (uncentred by default) correlation over
//! frames of the `j`-th half-cosine cepstral sequence.

use std::f64::consts::PI;

use crate::dsp::FramedEnvelope;
use crate::{Error, Result};

/// Cepstral coefficients computed per frame; the first is ignored by the
/// correlation.
pub const CEPSTRAL_COEFFS: usize = 6;
/// Default energy-control weight.
pub const DEFAULT_ALPHA: f64 = 5e-5;

/// `basis[j][i] = cos(j * pi * i / (I - 1))` for `j = 0..coeffs`, i.e.
/// `b_{j+1}(i)` with a zero-based band index.
pub fn cepstral_basis(bands: usize, coeffs: usize) -> Result<Vec<Vec<f64>>> {
    if bands < 2 {
        return Err(Error::invalid(format!("cepstral basis needs at least two bands, got {bands}")));
    }
    Ok((0..coeffs)
        .map(|j| (0..bands).map(|i| (j as f64 * PI * i as f64 / (bands - 1) as f64).cos()).collect())
        .collect())
}

/// `values[j][m]`: projection of frame `m` onto basis row `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstralSequences {
    pub values: Vec<Vec<f64>>,
}

pub fn cepstral_sequences(env: &FramedEnvelope, basis: &[Vec<f64>]) -> Result<CepstralSequences> {
    if basis.iter().any(|row| row.len() != env.bands()) {
        return Err(Error::invalid(format!(
            "basis is for {} bands, envelope has {}",
            basis.first().map_or(0, Vec::len),
            env.bands()
        )));
    }
    let values = basis
        .iter()
        .map(|row| (0..env.frames()).map(|m| row.iter().enumerate().map(|(i, b)| b * env.band(i)[m]).sum()).collect())
        .collect();
    Ok(CepstralSequences { values })
}

/// Uncentred normalised correlation of two equal-length sequences.
pub fn normalized_correlation(r: &[f64], p: &[f64]) -> Result<f64> {
    if r.len() != p.len() || r.is_empty() {
        return Err(Error::invalid(format!("sequence lengths {} and {}", r.len(), p.len())));
    }
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let np = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nr == 0.0 || np == 0.0 {
        return Err(Error::degenerate("correlation of an all-zero sequence is undefined"));
    }
    Ok(r.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() / (nr * np))
}

/// Whether cepstral sequences are mean-removed over frames before correlating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    None,
    Mean,
}

fn centred(x: &[f64], c: Centering) -> Vec<f64> {
    match c {
        Centering::None => x.to_vec(),
        Centering::Mean => {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            x.iter().map(|v| v - mean).collect()
        }
    }
}

/// Correlation and its gradient w.r.t. `p`. Degenerate input gives `R = 0`
/// and a zero gradient.
fn correlation_with_grad(r: &[f64], p: &[f64], c: Centering) -> (f64, Vec<f64>) {
    let (r, p) = (centred(r, c), centred(p, c));
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pp = p.iter().map(|v| v * v).sum::<f64>();
    let np = pp.sqrt();
    if nr == 0.0 || np == 0.0 {
        log::warn!("all-zero cepstral sequence; correlation taken as 0");
        return (0.0, vec![0.0; p.len()]);
    }
    let value = r.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / (nr * np);
    let mut grad: Vec<f64> = r.iter().zip(&p).map(|(a, b)| a / (nr * np) - value * b / pp).collect();
    if c == Centering::Mean {
        let mean = grad.iter().sum::<f64>() / grad.len() as f64;
        grad.iter_mut().for_each(|g| *g -= mean);
    }
    (value, grad)
}

/// Mean of `R(2)..R(6)`.
pub fn cepstral_correlation(er: &FramedEnvelope, ep: &FramedEnvelope) -> Result<f64> {
    Ok(Objective::new(0.0).correlations(er, ep)?.iter().sum::<f64>() / (CEPSTRAL_COEFFS - 1) as f64)
}

/// Sum over band/frame cells where the processed level exceeds the
/// reference of the excess in dB.
pub fn energy_control_loss(ep: &FramedEnvelope, er: &FramedEnvelope) -> Result<f64> {
    ep.same_shape(er)?;
    Ok(ep
        .values()
        .iter()
        .zip(er.values())
        .flat_map(|(p, r)| p.iter().zip(r).map(|(a, b)| a - b))
        .filter(|d| *d > 0.0)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// `-(1/5) sum R(j)`.
    pub cepstral_term: f64,
    pub energy_term: f64,
    pub alpha: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Mean of `R(2)..R(6)`, the cepstral correlation score.
    pub fn cepstral_correlation(&self) -> f64 {
        -self.cepstral_term
    }
}

pub fn total_loss(er: &FramedEnvelope, ep: &FramedEnvelope, alpha: f64) -> Result<LossBreakdown> {
    Objective::new(alpha).evaluate(er, ep)
}

/// `H = sigmoid(14.817 C_C + 4.616 C_B - 9.047)`.
pub fn haspi_combine(c_c: f64, c_b: f64) -> f64 {
    1.0 / (1.0 + (-(14.817 * c_c + 4.616 * c_b - 9.047)).exp())
}

/// Loss configuration with the cepstral basis prepared.
#[derive(Debug, Clone)]
pub struct Objective {
    pub alpha: f64,
    pub centering: Centering,
    basis: Vec<Vec<f64>>,
}

impl Objective {
    pub fn new(alpha: f64) -> Self {
        Self::with_centering(alpha, Centering::None)
    }

    pub fn with_centering(alpha: f64, centering: Centering) -> Self {
        let basis = cepstral_basis(crate::auditory::BANDS, CEPSTRAL_COEFFS).expect("valid basis size");
        Self { alpha, centering, basis }
    }

    fn basis_for(&self, bands: usize) -> Result<std::borrow::Cow<'_, [Vec<f64>]>> {
        if bands == self.basis[0].len() {
            Ok(std::borrow::Cow::Borrowed(&self.basis))
        } else {
            Ok(std::borrow::Cow::Owned(cepstral_basis(bands, CEPSTRAL_COEFFS)?))
        }
    }

    /// `R(2)..R(6)`.
    pub fn correlations(&self, er: &FramedEnvelope, ep: &FramedEnvelope) -> Result<Vec<f64>> {
        er.same_shape(ep)?;
        let basis = self.basis_for(er.bands())?;
        let cr = cepstral_sequences(er, &basis)?;
        let cp = cepstral_sequences(ep, &basis)?;
        Ok((1..CEPSTRAL_COEFFS)
            .map(|j| correlation_with_grad(&cr.values[j], &cp.values[j], self.centering).0)
            .collect())
    }

    pub fn evaluate(&self, er: &FramedEnvelope, ep: &FramedEnvelope) -> Result<LossBreakdown> {
        let rs = self.correlations(er, ep)?;
        let cepstral_term = -rs.iter().sum::<f64>() / (CEPSTRAL_COEFFS - 1) as f64;
        let energy_term = energy_control_loss(ep, er)?;
        Ok(LossBreakdown {
            cepstral_term,
            energy_term,
            alpha: self.alpha,
            total: cepstral_term + self.alpha * energy_term,
        })
    }

    /// Loss and its gradient w.r.t. the processed envelope, `[band][frame]`.
    /// A cell with `Ep == Er` is outside the energy set and gets no energy
    /// gradient.
    pub fn evaluate_with_grad(
        &self,
        er: &FramedEnvelope,
        ep: &FramedEnvelope,
    ) -> Result<(LossBreakdown, Vec<Vec<f64>>)> {
        er.same_shape(ep)?;
        let basis = self.basis_for(er.bands())?;
        let cr = cepstral_sequences(er, &basis)?;
        let cp = cepstral_sequences(ep, &basis)?;
        let scale = -1.0 / (CEPSTRAL_COEFFS - 1) as f64;
        let mut grad: Vec<Vec<f64>> = vec![vec![0.0; ep.frames()]; ep.bands()];
        let mut r_sum = 0.0;
        for j in 1..CEPSTRAL_COEFFS {
            let (r, dr) = correlation_with_grad(&cr.values[j], &cp.values[j], self.centering);
            r_sum += r;
            for (i, row) in grad.iter_mut().enumerate() {
                let b = basis[j][i] * scale;
                for (g, d) in row.iter_mut().zip(&dr) {
                    *g += b * d;
                }
            }
        }
        let mut energy_term = 0.0;
        for (i, row) in grad.iter_mut().enumerate() {
            for (m, g) in row.iter_mut().enumerate() {
                let d = ep.band(i)[m] - er.band(i)[m];
                if d > 0.0 {
                    energy_term += d;
                    *g += self.alpha;
                }
            }
        }
        let cepstral_term = scale * r_sum;
        Ok((
            LossBreakdown {
                cepstral_term,
                energy_term,
                alpha: self.alpha,
                total: cepstral_term + self.alpha * energy_term,
            },
            grad,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_env(seed: u64, bands: usize, frames: usize) -> FramedEnvelope {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FramedEnvelope::new(
            (0..bands).map(|_| (0..frames).map(|_| rng.gen_range(20.0..80.0)).collect()).collect(),
            125.0,
        )
        .unwrap()
    }

    #[test]
    fn basis_shape_and_values() {
        let b = cepstral_basis(32, 6).unwrap();
        assert!(b[0].iter().all(|&v| v == 1.0));
        assert_eq!(b[1][0], 1.0);
        assert!((b[1][31] + 1.0).abs() < 1e-12);
        for j in 1..6 {
            for k in 1..6 {
                if j != k {
                    let dot: f64 = b[j].iter().zip(&b[k]).map(|(x, y)| x * y).sum();
                    // DCT-I rows are orthogonal once the end points get half weight;
                    // with uniform weights only the end-point residue remains.
                    let ends = 0.5 * (b[j][0] * b[k][0] + b[j][31] * b[k][31]);
                    assert!((dot - ends).abs() < 1e-9, "{j},{k}: {dot}");
                }
            }
        }
        assert!(cepstral_basis(1, 6).is_err());
    }

    #[test]
    fn sequences_of_special_envelopes() {
        let b = cepstral_basis(32, 6).unwrap();
        let zero = FramedEnvelope::new(vec![vec![0.0; 3]; 32], 125.0).unwrap();
        assert!(cepstral_sequences(&zero, &b).unwrap().values.iter().flatten().all(|&v| v == 0.0));

        let c = 7.5;
        let flat = FramedEnvelope::new(vec![vec![c; 2]; 32], 125.0).unwrap();
        let s = cepstral_sequences(&flat, &b).unwrap();
        assert!((s.values[0][0] - 32.0 * c).abs() < 1e-9);
        for j in 1..6 {
            let direct: f64 = b[j].iter().map(|v| v * c).sum();
            assert!((s.values[j][0] - direct).abs() < 1e-9);
            if j % 2 == 1 {
                assert!(s.values[j][0].abs() < 1e-9);
            }
        }

        let row = FramedEnvelope::new(b[1].iter().map(|&v| vec![v]).collect(), 125.0).unwrap();
        let s = cepstral_sequences(&row, &b).unwrap();
        let self_proj: f64 = b[1].iter().map(|v| v * v).sum();
        assert!((s.values[1][0] - self_proj).abs() < 1e-12);

        let short = FramedEnvelope::new(vec![vec![0.0; 3]; 31], 125.0).unwrap();
        assert!(cepstral_sequences(&short, &b).is_err());
    }

    #[test]
    fn correlation_identities() {
        let r = [1.0, -2.0, 3.0, 0.5];
        assert!((normalized_correlation(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        assert!((normalized_correlation(&r, &neg).unwrap() + 1.0).abs() < 1e-12);
        let dbl: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        assert!((normalized_correlation(&r, &dbl).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(normalized_correlation(&r, &[0.0; 4]), Err(Error::DegenerateInput(_))));
        assert!(normalized_correlation(&r, &[1.0]).is_err());
    }

    #[test]
    fn cepstral_correlation_cases() {
        let er = random_env(1, 32, 40);
        assert!((cepstral_correlation(&er, &er).unwrap() - 1.0).abs() < 1e-12);

        // A band-independent offset moves C(1) and, because the odd-order
        // rows of a 32-point basis sum to one, also C(3) and C(5).
        let off = er.map(|_, _, v| v + 6.0);
        let o = Objective::new(0.0);
        let rs = o.correlations(&er, &off).unwrap();
        for (k, r) in rs.iter().enumerate() {
            let j = k + 2;
            if j % 2 == 0 {
                assert!((r - 1.0).abs() < 1e-12, "R({j}) = {r}");
            } else {
                assert!(*r < 1.0);
            }
        }

        let shuffled = er.map(|i, m, _| er.band(i)[(m * 7 + 3) % 40]);
        let v = cepstral_correlation(&er, &shuffled).unwrap();
        assert!(v > -1.0 && v < 1.0);
    }

    #[test]
    fn energy_loss_cases() {
        let er = random_env(2, 32, 20);
        assert_eq!(energy_control_loss(&er, &er).unwrap(), 0.0);
        let quieter = er.map(|_, _, v| v - 3.0);
        assert_eq!(energy_control_loss(&quieter, &er).unwrap(), 0.0);
        let bumped = er.map(|i, m, v| if (i + m) % 5 == 0 { v + 1.0 } else { v });
        let k = (0..32).flat_map(|i| (0..20).map(move |m| (i + m) % 5 == 0)).filter(|b| *b).count();
        assert!((energy_control_loss(&bumped, &er).unwrap() - k as f64).abs() < 1e-9);
        let other = random_env(3, 31, 20);
        assert!(energy_control_loss(&other, &er).is_err());
    }

    #[test]
    fn total_loss_cases() {
        let er = random_env(4, 32, 30);
        let l = total_loss(&er, &er, DEFAULT_ALPHA).unwrap();
        assert!((l.total + 1.0).abs() < 1e-12);
        assert_eq!(l.energy_term, 0.0);
        let up = er.map(|_, _, v| v + 1.0);
        let l = total_loss(&er, &up, 0.0).unwrap();
        assert!((l.total + cepstral_correlation(&er, &up).unwrap()).abs() < 1e-12);
        let l = total_loss(&er, &up, DEFAULT_ALPHA).unwrap();
        assert!((l.total - (l.cepstral_term + DEFAULT_ALPHA * l.energy_term)).abs() < 1e-12);
        assert!((l.energy_term - 32.0 * 30.0).abs() < 1e-9);
    }

    #[test]
    fn haspi_values() {
        assert!((haspi_combine(0.0, 0.0) - 0.0001177298768623252).abs() < 1e-12);
        assert!((haspi_combine(0.6106, 0.0) - 0.5).abs() < 1e-3);
        assert!((haspi_combine(1.0, 1.0) - 0.9999691394182845).abs() < 1e-12);
        assert!(haspi_combine(0.5, 0.1) > haspi_combine(0.4, 0.1));
        assert!(haspi_combine(0.5, 0.2) > haspi_combine(0.5, 0.1));
    }

    #[test]
    fn objective_gradient_matches_finite_difference() {
        let er = random_env(5, 32, 12);
        let ep = random_env(6, 32, 12);
        for centering in [Centering::None, Centering::Mean] {
            let o = Objective::with_centering(1e-3, centering);
            let (_, g) = o.evaluate_with_grad(&er, &ep).unwrap();
            for &(i, m) in &[(0, 0), (5, 3), (31, 11), (17, 6)] {
                let h = 1e-5;
                let f = |d: f64| {
                    o.evaluate(&er, &ep.map(|a, b, v| if (a, b) == (i, m) { v + d } else { v })).unwrap().total
                };
                let num = (f(h) - f(-h)) / (2.0 * h);
                assert!((num - g[i][m]).abs() < 1e-8, "{centering:?} ({i},{m}): {num} vs {}", g[i][m]);
            }
        }
    }

    #[test]
    fn loss_is_bounded_below() {
        for s in 0..5 {
            let er = random_env(10 + s, 32, 16);
            let ep = random_env(20 + s, 32, 16);
            assert!(total_loss(&er, &ep, DEFAULT_ALPHA).unwrap().total >= -1.0);
        }
    }
}
