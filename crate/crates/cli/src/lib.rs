//! Command implementations behind the `hafit` binary.
//!
//! Each command writes its outputs plus a `manifest.json` into one output
//! directory. Failures are classified for the process exit code: 2 for bad
//! usage or unreadable input, 1 for a failed check or a numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hafit_core::auditory::Audiogram;
use hafit_core::grad::{finite_difference_check, FdReport, Pipeline};
use hafit_core::objective::Objective;
use hafit_core::processor::{nalr_gains, FilterSource, FirDesigner, GainParams, GainRecord};
use hafit_core::report::{bar_chart, response_plot, BarMetric, ResponseCurve, RunManifest};
use hafit_core::synth::{write_synthetic_corpus, SynthCorpusSpec};
use hafit_core::train::{
    evaluate, load_corpus, paired_t_test, rows_to_csv, scores, summarize, summary_to_csv, train_with, CbPolicy,
    Checkpoint, CorpusIndex, EvalRow, Processor, ProcessorSummary, Split, TrainOptions, TrainingConfig,
};
use hafit_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing or malformed input files.
    Input(String),
    /// A verification that ran and did not pass.
    Check(String),
    /// The computation itself failed (non-finite values, divergence).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Check(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Check(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::Diverged { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Options shared by the commands that read a corpus and a config.
#[derive(Debug, Clone, Default)]
pub struct RunInputs {
    pub audiogram: Option<String>,
    pub corpus: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub cb_policy: Option<CbPolicy>,
}

impl RunInputs {
    pub fn config(&self) -> CliResult<TrainingConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainingConfig::load(p)?,
            None => TrainingConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(c) = self.cb_policy {
            cfg.cb_policy = c;
        }
        if let Some(a) = &self.audiogram {
            cfg.audiogram = Some(a.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn audiogram(&self, cfg: &TrainingConfig) -> CliResult<Audiogram> {
        let spec = cfg
            .audiogram
            .as_deref()
            .ok_or_else(|| CliError::Input("no audiogram given (use --audiogram or the config key)".into()))?;
        Ok(Audiogram::load(Path::new(spec))?)
    }

    pub fn corpus(&self, cfg: &TrainingConfig) -> CliResult<CorpusIndex> {
        let root = self.corpus.as_deref().ok_or_else(|| CliError::Input("--corpus is required".into()))?;
        if !root.is_dir() {
            return Err(CliError::Input(format!("corpus directory {} does not exist", root.display())));
        }
        Ok(load_corpus(root, cfg.split, cfg.segment_seconds)?)
    }
}

fn create_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn write(dir: &Path, name: &str, text: &str, manifest: &mut RunManifest) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

fn fir_csv(gains: &GainParams, source: FilterSource) -> String {
    let f = FirDesigner::standard().design(gains, source);
    let mut s = String::from("tap,coefficient\n");
    for (n, c) in f.coeffs.iter().enumerate() {
        let _ = writeln!(s, "{n},{c:?}");
    }
    s
}

fn record_json(r: &GainRecord) -> String {
    serde_json::to_string_pretty(r).expect("gain records serialise") + "\n"
}

/// NAL-R gains for an audiogram, with the filter taps and a response plot.
pub fn prescribe(command: Vec<String>, audiogram: &str, out: &Path) -> CliResult<GainParams> {
    let ag = Audiogram::load(Path::new(audiogram))?;
    let gains = nalr_gains(&ag);
    create_out(out)?;
    let mut manifest = RunManifest::new(command, format!("audiogram = {audiogram}\n"), 0);
    let rec = GainRecord::new(ag.label(), FilterSource::Prescribed, &gains);
    write(out, "gains.json", &record_json(&rec), &mut manifest)?;
    write(out, "fir.csv", &fir_csv(&gains, FilterSource::Prescribed), &mut manifest)?;
    let filt = FirDesigner::standard().design(&gains, FilterSource::Prescribed);
    let svg = response_plot(
        &format!("NAL-R prescription, {}", ag.label()),
        &[ResponseCurve { label: "NAL-R".into(), filter: &filt, dashed: true, anchors: Some(*gains.values()) }],
    );
    write(out, "response.svg", &svg, &mut manifest)?;
    manifest.save(out)?;
    Ok(gains)
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    pub best_gains: GainParams,
    pub final_gains: GainParams,
    pub epochs: usize,
    pub best_val_loss: Option<f64>,
}

/// Trains gains for one audiogram and writes the gains, history,
/// checkpoint, filter taps and a response plot against NAL-R.
pub fn fit(command: Vec<String>, inputs: &RunInputs, resume: Option<&Path>, out: &Path) -> CliResult<FitSummary> {
    let cfg = inputs.config()?;
    let ag = inputs.audiogram(&cfg)?;
    let idx = inputs.corpus(&cfg)?;
    let resume = resume.map(Checkpoint::load).transpose()?;
    create_out(out)?;
    let opts = TrainOptions { checkpoint_path: Some(out.join("checkpoint.json")), resume };
    let outcome = train_with(&cfg, &idx, &ag, &opts)?;

    let mut manifest = RunManifest::new(command, cfg.to_text(), cfg.seed);
    manifest.corpus_hash = Some(idx.hash.clone());
    let best = GainRecord::new(ag.label(), FilterSource::Trained, &outcome.best_gains);
    write(out, "gains.json", &record_json(&best), &mut manifest)?;
    let last = GainRecord::new(ag.label(), FilterSource::Trained, &outcome.final_gains);
    write(out, "final_gains.json", &record_json(&last), &mut manifest)?;
    write(out, "history.csv", &outcome.history.to_csv(), &mut manifest)?;
    outcome.checkpoint.save(&out.join("checkpoint.json"))?;
    manifest.outputs.push("checkpoint.json".into());
    write(out, "fir.csv", &fir_csv(&outcome.best_gains, FilterSource::Trained), &mut manifest)?;
    let designer = FirDesigner::standard();
    let trained = designer.design(&outcome.best_gains, FilterSource::Trained);
    let nalr = nalr_gains(&ag);
    let prescribed = designer.design(&nalr, FilterSource::Prescribed);
    let svg = response_plot(
        &format!("Processor response, {}", ag.label()),
        &[
            ResponseCurve {
                label: "trained".into(),
                filter: &trained,
                dashed: false,
                anchors: Some(*outcome.best_gains.values()),
            },
            ResponseCurve { label: "NAL-R".into(), filter: &prescribed, dashed: true, anchors: Some(*nalr.values()) },
        ],
    );
    write(out, "response.svg", &svg, &mut manifest)?;
    manifest.save(out)?;
    Ok(FitSummary {
        best_gains: outcome.best_gains,
        final_gains: outcome.final_gains,
        epochs: outcome.checkpoint.epoch,
        best_val_loss: outcome.best_val_loss,
    })
}

/// A processor named on the command line: a gains file, or one of the
/// keywords `original` (no processing) and `nalr`.
pub fn resolve_processor(spec: &str, ag: &Audiogram) -> CliResult<Processor> {
    match spec {
        "original" | "identity" => Ok(Processor::new("original", GainParams::identity())),
        "nalr" => Ok(Processor::new("nalr", nalr_gains(ag))),
        path => {
            let rec = GainRecord::load(Path::new(path))?;
            let tag = match rec.source {
                FilterSource::Identity => "original",
                FilterSource::Prescribed => "nalr",
                FilterSource::Trained => "trained",
            };
            Ok(Processor::new(tag, rec.gains()?))
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub rows: Vec<EvalRow>,
    pub summary: Vec<ProcessorSummary>,
    pub summary_csv: String,
    pub rows_csv: String,
    pub report: String,
}

/// Scores processors on the test split and writes per-utterance rows, the
/// summary table and a bar chart.
pub fn evaluate_cmd(command: Vec<String>, inputs: &RunInputs, gains: &[String], out: &Path) -> CliResult<EvalOutput> {
    if gains.is_empty() {
        return Err(CliError::Input("at least one --gains record is required".into()));
    }
    let cfg = inputs.config()?;
    let ag = inputs.audiogram(&cfg)?;
    let idx = inputs.corpus(&cfg)?;
    let mut procs: Vec<Processor> = Vec::new();
    for g in gains {
        let mut p = resolve_processor(g, &ag)?;
        let base = p.tag.clone();
        let mut k = 2;
        while procs.iter().any(|q| q.tag == p.tag) {
            p.tag = format!("{base}{k}");
            k += 1;
        }
        procs.push(p);
    }
    let rows = evaluate(&procs, idx.split(Split::Test), &ag, cfg.alpha, cfg.cb_policy)?;
    let summary = summarize(&rows);
    create_out(out)?;
    let mut manifest = RunManifest::new(command, cfg.to_text(), cfg.seed);
    manifest.corpus_hash = Some(idx.hash.clone());
    let rows_csv = rows_to_csv(&rows);
    let summary_csv = summary_to_csv(&summary);
    write(out, "rows.csv", &rows_csv, &mut manifest)?;
    write(out, "summary.csv", &summary_csv, &mut manifest)?;
    let svg = bar_chart(&format!("Held-out scores, {}", ag.label()), &summary, BarMetric::Haspi);
    write(out, "scores.svg", &svg, &mut manifest)?;

    let mut report = String::new();
    for s in &summary {
        let _ = writeln!(
            report,
            "{:<12} C_C {:.4} ± {:.4}   H {:.4} ± {:.4}   (n = {})",
            s.processor, s.mean_c_c, s.se_c_c, s.mean_haspi, s.se_haspi, s.utterances
        );
    }
    if procs.iter().any(|p| p.tag == "nalr") && idx.split(Split::Test).len() >= 2 {
        let base = scores(&rows, "nalr");
        for p in procs.iter().filter(|p| p.tag != "nalr") {
            let t = paired_t_test(&scores(&rows, &p.tag), &base)?;
            let _ = writeln!(
                report,
                "{} - nalr: mean ΔC_C {:+.4}, t = {:.3}, one-sided p = {:.3e}",
                p.tag, t.mean_diff, t.t, t.p_greater
            );
        }
    }
    write(out, "report.txt", &report, &mut manifest)?;
    manifest.save(out)?;
    Ok(EvalOutput { rows, summary, summary_csv, rows_csv, report })
}

#[derive(Debug, Clone)]
pub struct GradcheckOutcome {
    pub reports: Vec<FdReport>,
    pub gains: GainParams,
    pub tolerance: f64,
}

impl GradcheckOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passes(self.tolerance))
    }

    pub fn max_error(&self) -> f64 {
        self.reports.iter().map(FdReport::max_error).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("segment,{}\n", hafit_core::grad::FD_CSV_HEADER);
        for (i, r) in self.reports.iter().enumerate() {
            for line in r.to_csv().lines().skip(1) {
                let _ = writeln!(s, "{i},{line}");
            }
        }
        s
    }
}

/// Gradient check on `segments` random training segments drawn with `seed`,
/// at the configured initial gains unless `init_db` is given.
pub fn gradcheck_with(
    cfg: &TrainingConfig,
    idx: &CorpusIndex,
    ag: &Audiogram,
    segments: usize,
    step: f64,
    init_db: Option<f64>,
) -> CliResult<GradcheckOutcome> {
    if segments == 0 {
        return Err(CliError::Input("--segments must be at least 1".into()));
    }
    let model = hafit_core::auditory::AuditoryModel::new(ag)?;
    let len = (cfg.segment_seconds * hafit_core::MODEL_RATE).round() as usize;
    let pipe = Pipeline::new(&model, len, Objective::with_centering(cfg.alpha, cfg.centering))?;
    let gains = GainParams::flat(init_db.unwrap_or_else(|| cfg.init_gain_for(ag)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::with_capacity(segments);
    for _ in 0..segments {
        let x = idx.sample_segment(Split::Train, cfg.segment_seconds, &mut rng)?;
        let seg = pipe.prepare(x.samples())?;
        reports.push(finite_difference_check(&pipe.bind(&seg), &gains, step)?);
    }
    Ok(GradcheckOutcome { reports, gains, tolerance: hafit_core::grad::GRADCHECK_TOLERANCE })
}

pub fn gradcheck(
    command: Vec<String>,
    inputs: &RunInputs,
    segments: usize,
    step: f64,
    init_db: Option<f64>,
    out: Option<&Path>,
) -> CliResult<GradcheckOutcome> {
    let cfg = inputs.config()?;
    let ag = inputs.audiogram(&cfg)?;
    let idx = inputs.corpus(&cfg)?;
    let outcome = gradcheck_with(&cfg, &idx, &ag, segments, step, init_db)?;
    if let Some(dir) = out {
        create_out(dir)?;
        let mut manifest = RunManifest::new(command, cfg.to_text(), cfg.seed);
        manifest.corpus_hash = Some(idx.hash.clone());
        write(dir, "gradcheck.csv", &outcome.to_csv(), &mut manifest)?;
        manifest.save(dir)?;
    }
    Ok(outcome)
}

pub fn synth_corpus(command: Vec<String>, spec: &SynthCorpusSpec, out: &Path) -> CliResult<usize> {
    create_out(out)?;
    let paths = write_synthetic_corpus(out, spec)?;
    let mut manifest = RunManifest::new(
        command,
        format!(
            "train = {}\nvalidation = {}\ntest = {}\nseconds = {:?}\nrate = {:?}\n",
            spec.train, spec.validation, spec.test, spec.seconds, spec.rate
        ),
        spec.seed,
    );
    manifest.outputs =
        paths.iter().map(|p| p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/")).collect();
    manifest.save(out)?;
    Ok(paths.len())
}
