use hafit_core::auditory::{compression_gain, interpolate_audiogram, Audiogram, CompressionSchedule};
use hafit_core::dsp::{fir_convolve, resample, FramedEnvelope, Signal};
use hafit_core::objective::{energy_control_loss, haspi_combine, normalized_correlation, total_loss};
use hafit_core::processor::{nalr_gains, FilterSource, FirDesigner, GainParams, MAX_GAIN_DB, MIN_GAIN_DB};
use hafit_core::train::{adam_step, AdamState, TrainingConfig};
use hafit_core::{AUDIOGRAM_FREQS, MODEL_RATE};
use proptest::prelude::*;

fn envelope(values: Vec<f64>, bands: usize) -> FramedEnvelope {
    let frames = values.len() / bands;
    FramedEnvelope::new(values.chunks(frames).take(bands).map(<[f64]>::to_vec).collect(), 125.0).unwrap()
}

fn levels(bands: usize, frames: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-55.0..110.0f64, bands * frames)
}

/// Gain vectors whose slope between neighbouring anchors stays inside what
/// the FIR length can resolve at that frequency.
fn shaped_gains() -> impl Strategy<Value = [f64; 6]> {
    const MAX_STEP: [f64; 5] = [8.0, 12.0, 24.0, 48.0, 60.0];
    (0.0..40.0f64, prop::array::uniform5(-1.0..1.0f64)).prop_map(|(g0, u)| {
        let mut g = [g0; 6];
        for k in 0..5 {
            g[k + 1] = g[k] + u[k] * MAX_STEP[k];
        }
        g
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gains_are_clamped_to_rails(g in prop::array::uniform6(-200.0..200.0f64)) {
        let p = GainParams::new(g).unwrap();
        for (a, b) in p.values().iter().zip(g) {
            prop_assert!((MIN_GAIN_DB..=MAX_GAIN_DB).contains(a));
            prop_assert_eq!(*a, b.clamp(MIN_GAIN_DB, MAX_GAIN_DB));
        }
    }

    #[test]
    fn designed_filter_hits_anchor_gains(g in shaped_gains()) {
        let p = GainParams::new(g).unwrap();
        let f = FirDesigner::standard().design(&p, FilterSource::Trained);
        for (freq, want) in AUDIOGRAM_FREQS.iter().zip(p.values()) {
            let got = f.response_db(*freq);
            prop_assert!((got - want).abs() < 0.5, "{freq} Hz: {got} vs {want}");
        }
    }

    #[test]
    fn convolution_is_linear(
        x in prop::collection::vec(-1.0..1.0f64, 64),
        y in prop::collection::vec(-1.0..1.0f64, 64),
        k in prop::collection::vec(-1.0..1.0f64, 1..16),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let sig = |v: Vec<f64>| Signal::new(v, MODEL_RATE).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = fir_convolve(&sig(mix), &k).unwrap();
        let cx = fir_convolve(&sig(x), &k).unwrap();
        let cy = fir_convolve(&sig(y), &k).unwrap();
        for ((l, p), q) in lhs.samples().iter().zip(cx.samples()).zip(cy.samples()) {
            let r = a * p + b * q;
            prop_assert!((l - r).abs() <= 1e-10 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn resampled_length_follows_rate_ratio(n in 16usize..400) {
        let x = Signal::new((0..n).map(|i| (i as f64 * 0.1).sin()).collect(), 16_000.0).unwrap();
        let y = resample(&x, MODEL_RATE).unwrap();
        prop_assert_eq!(y.len(), (n * 3).div_ceil(2));
        prop_assert_eq!(y.rate(), MODEL_RATE);
    }

    #[test]
    fn compression_gain_is_bounded_and_monotone(
        e in -60.0..140.0f64,
        de in 0.0..20.0f64,
        attn in 0.0..50.0f64,
        cr in 1.0..4.0f64,
    ) {
        let lo = attn + 30.0;
        let g = compression_gain(e, attn, cr, lo, 100.0).unwrap();
        let g2 = compression_gain(e + de, attn, cr, lo, 100.0).unwrap();
        let floor = -attn;
        let ceil = -attn + (1.0 - 1.0 / cr) * (100.0 - lo);
        prop_assert!(g >= floor - 1e-12 && g <= ceil + 1e-12);
        prop_assert!(g2 >= g - 1e-12);
    }

    #[test]
    fn effective_ratio_stays_between_linear_and_nominal(band in 0usize..32, frac in 0.0..1.0f64) {
        let s = CompressionSchedule::new(32).unwrap();
        let r = s.effective_ratio(band, frac * s.max_ohc_gain[band]);
        prop_assert!(r >= 1.0 - 1e-12 && r <= s.ratio[band] + 1e-12);
    }

    #[test]
    fn interpolated_loss_stays_within_audiogram_range(t in prop::array::uniform6(0.0..100.0f64)) {
        let ag = Audiogram::new("p", t).unwrap();
        let centers: Vec<f64> = (0..40).map(|k| 50.0 * 1.15f64.powi(k)).collect();
        let lo = t.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in interpolate_audiogram(&ag, &centers) {
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn nalr_gains_are_nonnegative_and_monotone_in_loss(
        t in prop::array::uniform6(0.0..90.0f64),
        extra in 0.0..10.0f64,
    ) {
        let a = nalr_gains(&Audiogram::new("a", t).unwrap());
        let b = nalr_gains(&Audiogram::new("b", t.map(|v| v + extra)).unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(*x >= 0.0);
            prop_assert!(*y >= *x - 1e-9);
        }
    }

    #[test]
    fn energy_loss_is_nonnegative_and_zero_when_dominated(
        r in levels(4, 6),
        d in prop::collection::vec(0.0..30.0f64, 24),
    ) {
        let er = envelope(r.clone(), 4);
        let below = envelope(r.iter().zip(&d).map(|(a, b)| a - b).collect(), 4);
        let above = envelope(r.iter().zip(&d).map(|(a, b)| a + b).collect(), 4);
        prop_assert_eq!(energy_control_loss(&below, &er).unwrap(), 0.0);
        let e = energy_control_loss(&above, &er).unwrap();
        prop_assert!((e - d.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn total_loss_is_bounded_below(r in levels(32, 8), p in levels(32, 8), alpha in 0.0..1e-3f64) {
        let er = envelope(r, 32);
        let ep = envelope(p, 32);
        let l = total_loss(&er, &ep, alpha).unwrap();
        prop_assert!(l.total >= -1.0 - 1e-12);
        prop_assert!((l.total - (l.cepstral_term + alpha * l.energy_term)).abs() < 1e-12);
        prop_assert!(l.energy_term >= 0.0);
    }

    #[test]
    fn correlation_is_scale_invariant_and_bounded(
        r in prop::collection::vec(-10.0..10.0f64, 8),
        p in prop::collection::vec(-10.0..10.0f64, 8),
        s in 0.1..10.0f64,
    ) {
        prop_assume!(r.iter().any(|v| v.abs() > 1e-3) && p.iter().any(|v| v.abs() > 1e-3));
        let c = normalized_correlation(&r, &p).unwrap();
        let scaled: Vec<f64> = p.iter().map(|v| v * s).collect();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
        prop_assert!((normalized_correlation(&r, &scaled).unwrap() - c).abs() < 1e-9);
    }

    #[test]
    fn haspi_is_a_monotone_probability(cc in -1.0..1.0f64, cb in -1.0..1.0f64, d in 0.0..0.5f64) {
        let h = haspi_combine(cc, cb);
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!(haspi_combine(cc + d, cb) >= h);
        prop_assert!(haspi_combine(cc, cb + d) >= h);
    }

    #[test]
    fn adam_moves_against_the_gradient_by_at_most_lr(
        g in prop::array::uniform6(-1.0..1.0f64),
        lr in 1e-4..1.0f64,
    ) {
        let p = GainParams::flat(20.0).unwrap();
        let (q, s) = adam_step(&p, &g, &AdamState::default(), lr).unwrap();
        prop_assert_eq!(s.step, 1);
        for ((a, b), gk) in p.values().iter().zip(q.values()).zip(g) {
            let step = b - a;
            prop_assert!(step.abs() <= lr * (1.0 + 1e-9));
            prop_assert!(step * gk <= 0.0);
        }
    }

    #[test]
    fn config_text_round_trips(
        epochs in 0usize..10_000,
        batch in 1usize..256,
        lr in 1e-5..1.0f64,
        alpha in 0.0..1e-3f64,
        seed in any::<u64>(),
    ) {
        let cfg = TrainingConfig { epochs, batch_size: batch, learning_rate: lr, alpha, seed, ..Default::default() };
        let back = TrainingConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
