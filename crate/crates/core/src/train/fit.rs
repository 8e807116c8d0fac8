//! The optimisation loop, its history and checkpoints.
//!
//! Each epoch draws one batch of random segments from the training split,
//! averages the per-segment loss and gradient in index order, and takes one
//! Adam step. The segment draws of epoch `k` come from a ChaCha8 stream keyed
//! by `(seed, k + 1)`, so a run resumed from a checkpoint replays exactly the
//! draws the uninterrupted run would have made. Stream 0 supplies the fixed
//! validation segments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::TrainingConfig;
use super::corpus::{CorpusIndex, Split};
use crate::auditory::{Audiogram, AuditoryModel};
use crate::grad::{Pipeline, Segment};
use crate::objective::Objective;
use crate::processor::GainParams;
use crate::{Error, Result, MODEL_RATE};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean batch loss at the gains before this epoch's update.
    pub train_loss: f64,
    /// Mean validation loss after the update, every `validation_every`
    /// epochs.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.records {
            let val = r.val_loss.map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:?},{val}", r.epoch, r.train_loss);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }
}

/// Resumable training state. Stored as JSON:
/// `{version, audiogram, seed, epoch, gains, adam: {m, v, step},
///   best_gains, best_val_loss, history: {records: [...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub audiogram: String,
    pub seed: u64,
    /// Completed epochs.
    pub epoch: usize,
    pub gains: GainParams,
    pub adam: AdamState,
    pub best_gains: GainParams,
    pub best_val_loss: Option<f64>,
    pub history: History,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serialises");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Self =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::parse(
                path.display().to_string(),
                format!("checkpoint version {} is not {CHECKPOINT_VERSION}", c.version),
            ));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub final_gains: GainParams,
    pub best_gains: GainParams,
    pub best_val_loss: Option<f64>,
    pub history: History,
    pub checkpoint: Checkpoint,
}

/// Where and how often to write checkpoints while training.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub checkpoint_path: Option<PathBuf>,
    pub resume: Option<Checkpoint>,
}

fn epoch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains the six gains for `ag` and returns final and best-validation gains.
pub fn train(cfg: &TrainingConfig, idx: &CorpusIndex, ag: &Audiogram) -> Result<TrainOutcome> {
    train_with(cfg, idx, ag, &TrainOptions::default())
}

pub fn train_with(
    cfg: &TrainingConfig,
    idx: &CorpusIndex,
    ag: &Audiogram,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model = AuditoryModel::new(ag)?;
    let len = (cfg.segment_seconds * MODEL_RATE).round() as usize;
    let pipe = Pipeline::new(&model, len, Objective::with_centering(cfg.alpha, cfg.centering))?;

    let init = GainParams::flat(cfg.init_gain_for(ag))?;
    let mut state = match &opts.resume {
        Some(c) => {
            if c.seed != cfg.seed || c.audiogram != ag.label() {
                return Err(Error::invalid(format!(
                    "checkpoint is for audiogram {} seed {}, not {} seed {}",
                    c.audiogram,
                    c.seed,
                    ag.label(),
                    cfg.seed
                )));
            }
            c.clone()
        }
        None => Checkpoint {
            version: CHECKPOINT_VERSION,
            audiogram: ag.label().to_string(),
            seed: cfg.seed,
            epoch: 0,
            gains: init,
            adam: AdamState::default(),
            best_gains: init,
            best_val_loss: None,
            history: History::default(),
        },
    };
    if state.epoch >= cfg.epochs {
        return Ok(outcome(state));
    }

    let mut vrng = epoch_rng(cfg.seed, 0);
    let validation: Vec<Segment> = (0..cfg.validation_segments)
        .map(|_| pipe.prepare(idx.sample_segment(Split::Validation, cfg.segment_seconds, &mut vrng)?.samples()))
        .collect::<Result<_>>()?;
    let val_loss = |p: &GainParams| -> Result<f64> {
        let mut sum = 0.0;
        for seg in &validation {
            sum += pipe.breakdown(seg, p)?.total;
        }
        Ok(sum / validation.len() as f64)
    };
    if state.best_val_loss.is_none() {
        state.best_val_loss = Some(val_loss(&state.gains)?);
        state.best_gains = state.gains;
    }

    let save = |c: &Checkpoint| -> Result<()> {
        match &opts.checkpoint_path {
            Some(p) => c.save(p),
            None => Ok(()),
        }
    };

    for epoch in state.epoch..cfg.epochs {
        let mut rng = epoch_rng(cfg.seed, epoch as u64 + 1);
        let mut batch = || -> Result<(f64, [f64; 6])> {
            let mut loss_sum = 0.0;
            let mut grad_sum = [0.0; 6];
            for _ in 0..cfg.batch_size {
                let x = idx.sample_segment(Split::Train, cfg.segment_seconds, &mut rng)?;
                let seg = pipe.prepare(x.samples())?;
                let (loss, g) = pipe.gradient(&seg, &state.gains)?;
                loss_sum += loss.total;
                for (s, v) in grad_sum.iter_mut().zip(g) {
                    *s += v;
                }
            }
            let n = cfg.batch_size as f64;
            Ok((loss_sum / n, grad_sum.map(|s| s / n)))
        };
        let result = batch().and_then(|(l, g)| {
            if l.is_finite() && g.iter().all(|v| v.is_finite()) {
                Ok((l, g))
            } else {
                Err(Error::NonFinite { stage: "batch mean" })
            }
        });
        let (train_loss, grad) = match result {
            Ok(v) => v,
            Err(e) => {
                save(&state)?;
                return Err(diverged(epoch + 1, e));
            }
        };
        let (gains, adam) = adam_step(&state.gains, &grad, &state.adam, cfg.learning_rate)?;
        state.gains = gains;
        state.adam = adam;
        state.epoch = epoch + 1;
        let validate = state.epoch % cfg.validation_every == 0;
        let val = if validate { Some(val_loss(&state.gains)?) } else { None };
        if let Some(v) = val {
            if !v.is_finite() {
                return Err(Error::Diverged { epoch: state.epoch, reason: "non-finite validation loss".into() });
            }
            if state.best_val_loss.is_none_or(|b| v < b) {
                state.best_val_loss = Some(v);
                state.best_gains = state.gains;
            }
            log::info!("epoch {}: train {train_loss:.6} val {v:.6} gains {}", state.epoch, state.gains);
        }
        state.history.records.push(EpochRecord { epoch: state.epoch, train_loss, val_loss: val });
        if validate {
            save(&state)?;
        }
    }
    Ok(outcome(state))
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { stage } => Error::Diverged { epoch, reason: format!("non-finite value in {stage}") },
        other => other,
    }
}

fn outcome(state: Checkpoint) -> TrainOutcome {
    TrainOutcome {
        final_gains: state.gains,
        best_gains: state.best_gains,
        best_val_loss: state.best_val_loss,
        history: state.history.clone(),
        checkpoint: state,
    }
}
