//! Held-out evaluation of one or more processors on whole utterances.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::CbPolicy;
use super::corpus::CorpusEntry;
use crate::auditory::{Audiogram, AuditoryModel};
use crate::dsp::rms_normalize;
use crate::grad::Pipeline;
use crate::objective::{haspi_combine, Objective};
use crate::processor::GainParams;
use crate::{Error, Result};

/// One utterance through one processor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub utterance: String,
    pub audiogram: String,
    pub processor: String,
    pub c_c: f64,
    pub c_b: f64,
    pub haspi: f64,
    pub energy: f64,
    pub loss: f64,
}

/// Per-processor means and standard errors across utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessorSummary {
    pub processor: String,
    pub audiogram: String,
    pub utterances: usize,
    pub mean_c_c: f64,
    pub se_c_c: f64,
    pub mean_haspi: f64,
    pub se_haspi: f64,
    pub mean_energy: f64,
}

/// A named set of gains to evaluate; identity gains are the unprocessed
/// condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Processor {
    pub tag: String,
    pub gains: GainParams,
}

impl Processor {
    pub fn new(tag: impl Into<String>, gains: GainParams) -> Self {
        Self { tag: tag.into(), gains }
    }
}

/// Runs every processor over every utterance. Rows are ordered by
/// utterance, then processor, in input order.
pub fn evaluate(
    processors: &[Processor],
    utterances: &[CorpusEntry],
    ag: &Audiogram,
    alpha: f64,
    cb: CbPolicy,
) -> Result<Vec<EvalRow>> {
    if processors.is_empty() {
        return Err(Error::invalid("no processors to evaluate"));
    }
    let model = AuditoryModel::new(ag)?;
    let objective = Objective::new(alpha);
    let mut rows = Vec::with_capacity(processors.len() * utterances.len());
    for utt in utterances {
        let x = rms_normalize(&utt.signal())?;
        let pipe = Pipeline::new(&model, x.len(), objective.clone())?;
        let seg = pipe.prepare(x.samples())?;
        for proc in processors {
            let b = pipe.breakdown(&seg, &proc.gains)?;
            let c_c = b.cepstral_correlation();
            let c_b = cb.value(c_c);
            rows.push(EvalRow {
                utterance: utt.id.clone(),
                audiogram: ag.label().to_string(),
                processor: proc.tag.clone(),
                c_c,
                c_b,
                haspi: haspi_combine(c_c, c_b),
                energy: b.energy_term,
                loss: b.total,
            });
        }
    }
    Ok(rows)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Summaries per (audiogram, processor), sorted by mean index, highest
/// first; ties keep first-seen order.
pub fn summarize(rows: &[EvalRow]) -> Vec<ProcessorSummary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.audiogram.clone(), r.processor.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out: Vec<ProcessorSummary> = keys
        .into_iter()
        .map(|(audiogram, processor)| {
            let sel: Vec<&EvalRow> =
                rows.iter().filter(|r| r.audiogram == audiogram && r.processor == processor).collect();
            let (mean_c_c, se_c_c) = mean_se(&sel.iter().map(|r| r.c_c).collect::<Vec<_>>());
            let (mean_haspi, se_haspi) = mean_se(&sel.iter().map(|r| r.haspi).collect::<Vec<_>>());
            let (mean_energy, _) = mean_se(&sel.iter().map(|r| r.energy).collect::<Vec<_>>());
            ProcessorSummary {
                processor,
                audiogram,
                utterances: sel.len(),
                mean_c_c,
                se_c_c,
                mean_haspi,
                se_haspi,
                mean_energy,
            }
        })
        .collect();
    out.sort_by(|a, b| b.mean_haspi.total_cmp(&a.mean_haspi));
    out
}

/// C_C of one processor per utterance, in row order.
pub fn scores(rows: &[EvalRow], processor: &str) -> Vec<f64> {
    rows.iter().filter(|r| r.processor == processor).map(|r| r.c_c).collect()
}

pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from("utterance,audiogram,processor,c_c,c_b,haspi,energy,loss\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:?},{:?},{:?},{:?},{:?}",
            r.utterance, r.audiogram, r.processor, r.c_c, r.c_b, r.haspi, r.energy, r.loss
        );
    }
    s
}

pub fn summary_to_csv(summary: &[ProcessorSummary]) -> String {
    let mut s = String::from("audiogram,processor,utterances,mean_c_c,se_c_c,mean_haspi,se_haspi,mean_energy\n");
    for r in summary {
        let _ = writeln!(
            s,
            "{},{},{},{:?},{:?},{:?},{:?},{:?}",
            r.audiogram, r.processor, r.utterances, r.mean_c_c, r.se_c_c, r.mean_haspi, r.se_haspi, r.mean_energy
        );
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Paired t-test of `a - b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// P(T >= t) under the null: evidence that `a > b`.
    pub p_greater: f64,
    pub p_two_sided: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::degenerate("a paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean_diff, se) = mean_se(&d);
    let n = d.len();
    if se == 0.0 {
        let (t, p) = if mean_diff > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean_diff < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        };
        let two = if mean_diff == 0.0 { 1.0 } else { 0.0 };
        return Ok(PairedTest { n, mean_diff, t, p_greater: p, p_two_sided: two });
    }
    let t = mean_diff / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let p_greater = 1.0 - dist.cdf(t);
    let p_two_sided = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(PairedTest { n, mean_diff, t, p_greater, p_two_sided })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{write_synthetic_corpus, SynthCorpusSpec};
    use crate::train::load_corpus;

    #[test]
    fn t_test_against_reference_values() {
        // scipy.stats.ttest_rel([1.2, 2.4, 3.1, 4.8, 5.0], [1.0, 2.0, 3.0, 4.0, 5.5])
        // -> t = 0.9428090415820632, two-sided p = 0.3991616175432798
        let a = [1.2, 2.4, 3.1, 4.8, 5.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.5];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 0.9428090415820632).abs() < 1e-12);
        assert!((r.p_two_sided - 0.3991616175432798).abs() < 1e-9);
        assert!((r.p_greater - 0.3991616175432798 / 2.0).abs() < 1e-9);
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
        let same = paired_t_test(&[1.0, 2.0], &[0.5, 1.5]).unwrap();
        assert_eq!(same.p_greater, 0.0);
    }

    #[test]
    fn mean_and_standard_error() {
        assert_eq!(mean_se(&[0.3]), (0.3, 0.0));
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_on_normal_hearing_is_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthCorpusSpec { train: 1, validation: 1, test: 2, seconds: 0.8, ..Default::default() };
        write_synthetic_corpus(dir.path(), &spec).unwrap();
        let idx = load_corpus(dir.path(), [1.0, 1.0, 1.0], 0.5).unwrap();
        let procs = [Processor::new("original", GainParams::identity())];
        for policy in [CbPolicy::Zero, CbPolicy::Mirror] {
            let rows = evaluate(&procs, &idx.test, &Audiogram::zero(), 5e-5, policy).unwrap();
            assert_eq!(rows.len(), 2);
            for r in &rows {
                assert!((r.c_c - 1.0).abs() < 1e-6, "{r:?}");
            }
            let s = summarize(&rows);
            let want = haspi_combine(1.0, policy.value(1.0));
            assert!((s[0].mean_haspi - want).abs() < 1e-6);
            let again = evaluate(&procs, &idx.test, &Audiogram::zero(), 5e-5, policy).unwrap();
            assert_eq!(rows_to_csv(&rows), rows_to_csv(&again));
        }
    }

    #[test]
    fn summary_sorted_by_index() {
        let row = |p: &str, c: f64| EvalRow {
            utterance: "u".into(),
            audiogram: "N1".into(),
            processor: p.into(),
            c_c: c,
            c_b: 0.0,
            haspi: haspi_combine(c, 0.0),
            energy: 0.0,
            loss: -c,
        };
        let rows = vec![row("original", 0.5), row("nalr", 0.7), row("trained", 0.6)];
        let s = summarize(&rows);
        let order: Vec<&str> = s.iter().map(|r| r.processor.as_str()).collect();
        assert_eq!(order, ["nalr", "trained", "original"]);
        assert!(s.iter().all(|r| r.se_c_c == 0.0 && r.utterances == 1));
        assert_eq!(summary_to_csv(&s).lines().count(), 4);
    }
}
