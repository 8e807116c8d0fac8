//! Speech corpus indexing and segment sampling.
//!
//! A corpus is a directory of WAV files. If it has `train/`, `valid/` (or
//! `validation/`, `dev/`) and `test/` subdirectories those are the splits;
//! otherwise all WAVs found below the root are sorted by path and divided by
//! the configured proportions. Audio is resampled to the model rate once, at
//! load time, and kept in memory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::dsp::wav::read_wav;
use crate::dsp::{resample, rms_normalize, Signal};
use crate::{Error, Result, MODEL_RATE};

/// Attempts to find a non-silent segment before giving up.
const SEGMENT_RETRIES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub path: PathBuf,
    /// Path relative to the corpus root, `/`-separated.
    pub id: String,
    pub source_rate: f64,
    /// Seconds, at the source rate.
    pub duration: f64,
    pub resampled: bool,
    audio: Arc<[f32]>,
}

impl CorpusEntry {
    /// The utterance at the model rate.
    pub fn signal(&self) -> Signal {
        Signal::new(self.audio.iter().map(|&v| f64::from(v)).collect(), MODEL_RATE).expect("validated at load")
    }

    pub fn len(&self) -> usize {
        self.audio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audio.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CorpusIndex {
    pub root: PathBuf,
    pub train: Vec<CorpusEntry>,
    pub validation: Vec<CorpusEntry>,
    pub test: Vec<CorpusEntry>,
    /// Files left out, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
    /// SHA-256 over split names, relative paths and file bytes.
    pub hash: String,
}

impl CorpusIndex {
    pub fn rate(&self) -> f64 {
        MODEL_RATE
    }

    pub fn split(&self, s: Split) -> &[CorpusEntry] {
        match s {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total audio in seconds across all splits.
    pub fn total_seconds(&self) -> f64 {
        Split::ALL.iter().flat_map(|s| self.split(*s)).map(|e| e.duration).sum()
    }

    /// A uniformly placed `seconds`-long segment from split `s` at the model
    /// rate, normalised to RMS 1. Every admissible start position in the
    /// split is equally likely; silent draws are retried.
    pub fn sample_segment<R: Rng + ?Sized>(&self, s: Split, seconds: f64, rng: &mut R) -> Result<Signal> {
        let len = (seconds * MODEL_RATE).round() as usize;
        if len == 0 {
            return Err(Error::invalid("segment length rounds to zero samples"));
        }
        let starts: Vec<usize> = self.split(s).iter().map(|e| e.len().checked_sub(len).map_or(0, |d| d + 1)).collect();
        let total: usize = starts.iter().sum();
        if total == 0 {
            return Err(Error::degenerate(format!("no file in the {} split is at least {seconds} s long", s.name())));
        }
        for _ in 0..SEGMENT_RETRIES {
            let mut pick = rng.gen_range(0..total);
            let (entry, n) = self
                .split(s)
                .iter()
                .zip(&starts)
                .find(|(_, &n)| {
                    if pick < n {
                        true
                    } else {
                        pick -= n;
                        false
                    }
                })
                .expect("pick < total");
            debug_assert!(pick < *n);
            let seg: Vec<f64> = entry.audio[pick..pick + len].iter().map(|&v| f64::from(v)).collect();
            match rms_normalize(&Signal::new(seg, MODEL_RATE)?) {
                Ok(sig) => return Ok(sig),
                Err(Error::DegenerateInput(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::degenerate(format!("{SEGMENT_RETRIES} consecutive silent segments drawn")))
    }
}

fn wav_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> =
        std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            wav_files(&p, out)?;
        } else if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")) {
            out.push(p);
        }
    }
    Ok(())
}

fn relative_id(root: &Path, p: &Path) -> String {
    let rel = p.strip_prefix(root).unwrap_or(p);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Splits `n` items by proportions; train takes the rounding remainder.
fn split_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let sum: f64 = ratios.iter().sum();
    let valid = ((n as f64 * ratios[1] / sum).round() as usize).min(n);
    let test = ((n as f64 * ratios[2] / sum).round() as usize).min(n - valid);
    [n - valid - test, valid, test]
}

/// Indexes and loads the corpus under `root`. Files that cannot be read or
/// are shorter than `min_seconds` are skipped with a warning; an empty split
/// is an error.
pub fn load_corpus(root: &Path, ratios: [f64; 3], min_seconds: f64) -> Result<CorpusIndex> {
    if !root.is_dir() {
        return Err(Error::invalid(format!("corpus directory {} does not exist", root.display())));
    }
    let sub = |names: &[&str]| names.iter().map(|n| root.join(n)).find(|p| p.is_dir());
    let lists: [Vec<PathBuf>; 3] = match (sub(&["train"]), sub(&["valid", "validation", "dev"]), sub(&["test"])) {
        (Some(tr), Some(va), Some(te)) => {
            let mut out: [Vec<PathBuf>; 3] = Default::default();
            for (dir, list) in [tr, va, te].iter().zip(out.iter_mut()) {
                wav_files(dir, list)?;
            }
            out
        }
        _ => {
            let mut all = Vec::new();
            wav_files(root, &mut all)?;
            let [a, b, _] = split_counts(all.len(), ratios);
            let test = all.split_off(a + b);
            let valid = all.split_off(a);
            [all, valid, test]
        }
    };

    let mut hasher = Sha256::new();
    let mut skipped = Vec::new();
    let mut splits: [Vec<CorpusEntry>; 3] = Default::default();
    for ((split, list), out) in Split::ALL.iter().zip(lists).zip(splits.iter_mut()) {
        for path in list {
            let id = relative_id(root, &path);
            let loaded = std::fs::read(&path).map_err(|e| Error::io(&path, e)).and_then(|bytes| {
                let sig = read_wav(&path)?;
                Ok((bytes, sig))
            });
            let (bytes, sig) = match loaded {
                Ok(v) => v,
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    skipped.push((path, e.to_string()));
                    continue;
                }
            };
            if sig.duration() < min_seconds {
                let why = format!("{:.3} s is shorter than {min_seconds} s", sig.duration());
                log::warn!("skipping {}: {why}", path.display());
                skipped.push((path, why));
                continue;
            }
            hasher.update(split.name().as_bytes());
            hasher.update([0]);
            hasher.update(id.as_bytes());
            hasher.update([0]);
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
            let resampled = sig.rate() != MODEL_RATE;
            let at_model = if resampled { resample(&sig, MODEL_RATE)? } else { sig.clone() };
            out.push(CorpusEntry {
                id,
                source_rate: sig.rate(),
                duration: sig.duration(),
                resampled,
                audio: at_model.samples().iter().map(|&v| v as f32).collect(),
                path,
            });
        }
        if out.is_empty() {
            return Err(Error::degenerate(format!("corpus split {} is empty", split.name())));
        }
    }
    let [train, validation, test] = splits;
    Ok(CorpusIndex { root: root.to_path_buf(), train, validation, test, skipped, hash: hex(&hasher.finalize()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::wav::{write_wav, WavFormat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tone(rate: f64, secs: f64) -> Signal {
        let n = (rate * secs) as usize;
        Signal::new((0..n).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect(), rate).unwrap()
    }

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_counts(3, [1.0, 1.0, 1.0]), [1, 1, 1]);
        assert_eq!(split_counts(200, [8.0, 1.0, 1.0]), [160, 20, 20]);
        assert_eq!(split_counts(2, [1.0, 1.0, 1.0]), [0, 1, 1]);
    }

    #[test]
    fn flat_directory_by_ratio() {
        let dir = tempfile::tempdir().unwrap();
        for (i, rate) in [16_000.0, 24_000.0, 16_000.0].iter().enumerate() {
            write_wav(&dir.path().join(format!("u{i}.wav")), &tone(*rate, 1.0), WavFormat::Pcm16).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let idx = load_corpus(dir.path(), [1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.validation[0].id, "u1.wav");
        assert!(!idx.validation[0].resampled);
        assert!(idx.train[0].resampled);
        assert_eq!(idx.train[0].len(), 24_000);
        assert_eq!(idx.hash.len(), 64);
        let again = load_corpus(dir.path(), [1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(idx.hash, again.hash);
    }

    #[test]
    fn split_directories_and_skips() {
        let dir = tempfile::tempdir().unwrap();
        for sub in ["train", "valid", "test"] {
            std::fs::create_dir(dir.path().join(sub)).unwrap();
            write_wav(&dir.path().join(sub).join("a.wav"), &tone(16_000.0, 1.0), WavFormat::Pcm16).unwrap();
        }
        write_wav(&dir.path().join("train/short.wav"), &tone(16_000.0, 0.2), WavFormat::Pcm16).unwrap();
        std::fs::write(dir.path().join("train/broken.wav"), b"RIFFnope").unwrap();
        let idx = load_corpus(dir.path(), [8.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!((idx.train.len(), idx.validation.len(), idx.test.len()), (1, 1, 1));
        assert_eq!(idx.skipped.len(), 2);
        assert_eq!(idx.test[0].id, "test/a.wav");
    }

    #[test]
    fn empty_or_missing_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_corpus(dir.path(), [1.0, 1.0, 1.0], 0.5).is_err());
        assert!(load_corpus(&dir.path().join("nope"), [1.0, 1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn segments_are_normalised_and_replayable() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            write_wav(&dir.path().join(format!("u{i}.wav")), &tone(16_000.0, 1.0), WavFormat::Pcm16).unwrap();
        }
        let idx = load_corpus(dir.path(), [1.0, 1.0, 1.0], 0.5).unwrap();
        let a = idx.sample_segment(Split::Train, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = idx.sample_segment(Split::Train, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12_000);
        assert!((a.rms() - 1.0).abs() < 1e-9);
        assert!(idx.sample_segment(Split::Train, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).is_err());
    }
}
