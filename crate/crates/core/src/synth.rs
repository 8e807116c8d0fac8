//! Deterministic speech-like test material.
//!
//! A small source-filter synthesizer: a jittered glottal pulse train with a
//! falling pitch contour drives a cascade of time-varying formant
//! resonators, interleaved with fricative noise, plosive bursts, nasal codas
//! and pauses. It is not intelligible speech, but it has the spectral tilt,
//! formant structure and 4 Hz-ish syllabic modulation that the cepstral
//! objective is sensitive to, and it is reproducible from a seed.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::wav::{write_wav, WavFormat};
use crate::dsp::Signal;
use crate::{Error, Result};

/// F1, F2, F3 in Hz for a handful of English vowels.
const VOWELS: [[f64; 3]; 10] = [
    [270.0, 2290.0, 3010.0],
    [390.0, 1990.0, 2550.0],
    [530.0, 1840.0, 2480.0],
    [660.0, 1720.0, 2410.0],
    [730.0, 1090.0, 2440.0],
    [570.0, 840.0, 2410.0],
    [440.0, 1020.0, 2240.0],
    [300.0, 870.0, 2240.0],
    [640.0, 1190.0, 2390.0],
    [490.0, 1350.0, 1690.0],
];
const NASAL: [f64; 3] = [250.0, 1000.0, 2200.0];
const F4: f64 = 3500.0;
const BANDWIDTHS: [f64; 4] = [80.0, 100.0, 140.0, 200.0];

/// Voice parameters that stay fixed within an utterance.
#[derive(Debug, Clone, Copy)]
struct Voice {
    f0: f64,
    formant_scale: f64,
    breathiness: f64,
}

/// Two-pole resonator.
#[derive(Debug, Clone, Copy, Default)]
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    /// Unity gain at DC, as in a cascade formant synthesizer.
    #[inline]
    fn step(&mut self, x: f64, f: f64, bw: f64, rate: f64) -> f64 {
        let (a1, a2) = Self::poles(f, bw, rate);
        self.run(x, 1.0 - a1 - a2, a1, a2)
    }

    /// Unity gain at the centre frequency.
    #[inline]
    fn step_peak(&mut self, x: f64, f: f64, bw: f64, rate: f64) -> f64 {
        let (a1, a2) = Self::poles(f, bw, rate);
        let r = (-a2).sqrt();
        let th = 2.0 * PI * f / rate;
        self.run(x, (1.0 - r) * (1.0 - 2.0 * r * (2.0 * th).cos() + r * r).sqrt(), a1, a2)
    }

    #[inline]
    fn poles(f: f64, bw: f64, rate: f64) -> (f64, f64) {
        let r = (-PI * bw / rate).exp();
        (2.0 * r * (2.0 * PI * f / rate).cos(), -r * r)
    }

    #[inline]
    fn run(&mut self, x: f64, gain: f64, a1: f64, a2: f64) -> f64 {
        let y = gain * x + a1 * self.y1 + a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Vowel,
    Nasal,
    Fricative,
    Burst,
    Silence,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    kind: Kind,
    samples: usize,
    formants: [f64; 3],
    level: f64,
}

fn plan_events(rng: &mut ChaCha8Rng, voice: &Voice, rate: f64, total: usize) -> Vec<Event> {
    let ms = |v: f64| (v * rate / 1000.0) as usize;
    let mut events =
        vec![Event { kind: Kind::Silence, samples: ms(rng.gen_range(50.0..150.0)), formants: VOWELS[0], level: 0.0 }];
    let mut used = events[0].samples;
    while used < total {
        let syllables = rng.gen_range(1..=3);
        for _ in 0..syllables {
            let vowel = VOWELS[rng.gen_range(0..VOWELS.len())].map(|f| f * voice.formant_scale);
            match rng.gen_range(0..4) {
                0 => events.push(Event {
                    kind: Kind::Fricative,
                    samples: ms(rng.gen_range(60.0..130.0)),
                    formants: [rng.gen_range(2500.0..4500.0), rng.gen_range(4500.0..7000.0), 0.0],
                    level: rng.gen_range(0.1..0.3),
                }),
                1 => {
                    events.push(Event {
                        kind: Kind::Silence,
                        samples: ms(rng.gen_range(30.0..60.0)),
                        formants: vowel,
                        level: 0.0,
                    });
                    events.push(Event {
                        kind: Kind::Burst,
                        samples: ms(rng.gen_range(8.0..20.0)),
                        formants: [rng.gen_range(1500.0..4000.0), 0.0, 0.0],
                        level: rng.gen_range(0.3..0.6),
                    });
                }
                _ => {}
            }
            events.push(Event {
                kind: Kind::Vowel,
                samples: ms(rng.gen_range(110.0..260.0)),
                formants: vowel,
                level: rng.gen_range(0.6..1.0),
            });
            if rng.gen_bool(0.3) {
                events.push(Event {
                    kind: Kind::Nasal,
                    samples: ms(rng.gen_range(50.0..100.0)),
                    formants: NASAL.map(|f| f * voice.formant_scale),
                    level: rng.gen_range(0.2..0.35),
                });
            }
        }
        events.push(Event {
            kind: Kind::Silence,
            samples: ms(rng.gen_range(60.0..300.0)),
            formants: VOWELS[0],
            level: 0.0,
        });
        used = events.iter().map(|e| e.samples).sum();
    }
    events
}

/// Raised-cosine onset/offset gain for sample `n` of an `len`-sample event.
fn edge(n: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let d = n.min(len - 1 - n);
    if d >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * d as f64 / ramp as f64).cos()
    }
}

/// One utterance of `seconds` at `rate`, peak-normalised to 0.5.
pub fn synthesize_utterance(seed: u64, seconds: f64, rate: f64) -> Result<Signal> {
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(Error::invalid(format!("utterance length must be positive, got {seconds}")));
    }
    if !(rate >= 8000.0) {
        return Err(Error::invalid(format!("synthesis rate must be at least 8 kHz, got {rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voice = Voice {
        f0: rng.gen_range(95.0..230.0),
        formant_scale: rng.gen_range(0.9..1.15),
        breathiness: rng.gen_range(0.02..0.08),
    };
    let total = (seconds * rate).round() as usize;
    let events = plan_events(&mut rng, &voice, rate, total);

    let mut out = Vec::with_capacity(total);
    let mut res = [Resonator::default(); 4];
    let mut noise_res = [Resonator::default(); 2];
    let mut glottal_lp = 0.0;
    let mut phase = 0.0;
    let mut formants = events.iter().find(|e| e.kind == Kind::Vowel).map_or(VOWELS[0], |e| e.formants);
    let glide = 1.0 - (-1.0 / (0.025 * rate)).exp();
    let ramp = (0.012 * rate) as usize;
    let mut period_jitter = 1.0;
    'events: for ev in &events {
        for n in 0..ev.samples {
            if out.len() == total {
                break 'events;
            }
            let t = out.len() as f64 / rate;
            let g = ev.level * edge(n, ev.samples, ramp);
            let white: f64 = rng.gen_range(-1.0..1.0);
            let sample = match ev.kind {
                Kind::Vowel | Kind::Nasal => {
                    for (f, target) in formants.iter_mut().zip(&ev.formants) {
                        *f += glide * (target - *f);
                    }
                    let f0 = voice.f0 * (1.0 - 0.25 * t / seconds) * (1.0 + 0.06 * (2.0 * PI * 0.7 * t).sin());
                    phase += f0 * period_jitter / rate;
                    let pulse = if phase >= 1.0 {
                        phase -= 1.0;
                        period_jitter = 1.0 + rng.gen_range(-0.02..0.02);
                        1.0
                    } else {
                        0.0
                    };
                    glottal_lp = 0.94 * glottal_lp + pulse;
                    let src = glottal_lp + voice.breathiness * white;
                    let mut y = src;
                    for (k, r) in res.iter_mut().enumerate() {
                        let f = if k < 3 { formants[k] } else { F4 * voice.formant_scale };
                        y = r.step(y, f, BANDWIDTHS[k], rate);
                    }
                    if ev.kind == Kind::Nasal {
                        y *= 0.6;
                    }
                    g * y
                }
                Kind::Fricative => {
                    let nyq = 0.45 * rate;
                    let a = noise_res[0].step_peak(white, ev.formants[0].min(nyq), 1200.0, rate);
                    let b = noise_res[1].step_peak(white, ev.formants[1].min(nyq), 2000.0, rate);
                    g * (a + 0.7 * b)
                }
                Kind::Burst => {
                    let nyq = 0.45 * rate;
                    g * (0.5 * white + noise_res[0].step_peak(white, ev.formants[0].min(nyq), 2500.0, rate))
                }
                Kind::Silence => {
                    for r in res.iter_mut() {
                        r.y1 *= 0.9;
                        r.y2 *= 0.9;
                    }
                    0.0
                }
            };
            out.push(sample);
        }
    }
    out.resize(total, 0.0);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::degenerate("synthesizer produced silence"));
    }
    let scale = 0.5 / peak;
    // Background noise about 70 dB below the peak keeps pauses from being
    // digitally silent.
    let floor = 0.5 * 10f64.powf(-70.0 / 20.0);
    let y = out.iter().map(|v| v * scale + floor * rng.gen_range(-1.0..1.0)).collect();
    Signal::new(y, rate)
}

/// Layout of a synthetic corpus on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpusSpec {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub seconds: f64,
    pub rate: f64,
    pub seed: u64,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        Self { train: 160, validation: 20, test: 20, seconds: 3.0, rate: 16_000.0, seed: 2024 }
    }
}

impl SynthCorpusSpec {
    pub fn total_seconds(&self) -> f64 {
        (self.train + self.validation + self.test) as f64 * self.seconds
    }
}

/// Writes `train/`, `valid/` and `test/` subdirectories of 16-bit WAVs under
/// `root` and returns the file paths in split order.
pub fn write_synthetic_corpus(root: &Path, spec: &SynthCorpusSpec) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let mut index = 0u64;
    for (dir, count) in [("train", spec.train), ("valid", spec.validation), ("test", spec.test)] {
        let d = root.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        for k in 0..count {
            let utt_seed = spec.seed.wrapping_mul(1_000_003).wrapping_add(index);
            index += 1;
            let sig = synthesize_utterance(utt_seed, spec.seconds, spec.rate)?;
            let path = d.join(format!("{dir}_{k:04}.wav"));
            write_wav(&path, &sig, WavFormat::Pcm16)?;
            paths.push(path);
        }
    }
    Ok(paths)
}
