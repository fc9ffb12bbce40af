//! Training: model, analytic gradients, optimizer, checkpoints and the
//! epoch loop.

mod checkpoint;
pub mod encoder;
pub mod gradcheck;
pub mod model;
pub mod optim;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::cross_entropy_index;
use crate::symsol::Dataset;

pub use checkpoint::{load_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
pub use encoder::Conv2d;
pub use gradcheck::{gradient_check, GradCheck};
pub use model::{ForwardCache, Model, ModelConfig, Prepared, ProjectionKind, RawGrad};
pub use optim::{step_decay, Adam, Nesterov, Optimizer, OptimizerKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub seed: u64,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Nesterov,
            lr: 0.001,
            momentum: 0.9,
            batch_size: 64,
            epochs: 40,
            lr_decay: 0.1,
            decay_every: 15,
            seed: 0,
            max_steps: None,
            checkpoint_every: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.decay_every == 0 {
            return Err(Error::Config(
                "batch_size, epochs and decay_every must be positive".into(),
            ));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0) {
            return Err(Error::Config("lr_decay must be positive".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        step_decay(self.lr, self.lr_decay, self.decay_every, epoch)
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub loss: f64,
    pub lr: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub step_losses: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
}

/// Where [`train`] writes its artifacts.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub dir: PathBuf,
}

impl TrainOutput {
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.jsonl")
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("model.i2sc")
    }

    pub fn epoch_checkpoint(&self, epoch: usize) -> PathBuf {
        self.dir.join(format!("model_epoch{epoch:03}.i2sc"))
    }
}

/// Mean loss and mean raw gradient over a batch. Per-sample work runs in
/// parallel; the sum is taken in index order so the result does not depend
/// on the thread count.
pub fn batch_gradient(
    model: &Model,
    prep: &Prepared,
    data: &Dataset,
    indices: &[usize],
    targets: &[usize],
    mask_seed: u64,
    mask_stream: u64,
) -> Result<(f64, RawGrad)> {
    let head = model.head();
    let parts: Vec<(f64, RawGrad)> = indices
        .par_iter()
        .enumerate()
        .map(|(j, &i)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
            rng.set_stream(mask_stream + j as u64);
            let mask = model.sample_mask(&mut rng);
            let (logits, cache) = model.forward(prep, head, &data.image(i), mask)?;
            let (loss, dlogits) = cross_entropy_index(&logits, targets[i]);
            Ok((loss, model.backward_raw(prep, head, &cache, &dlogits)?))
        })
        .collect::<Result<_>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grad) = iter.next().ok_or_else(|| Error::Empty("batch".into()))?;
    for (l, g) in iter {
        loss += l;
        grad.add(&g);
    }
    let n = indices.len() as f64;
    grad.scale(1.0 / n);
    Ok((loss / n, grad))
}

/// Nearest training-grid cell of every label.
pub fn label_targets(model: &Model, data: &Dataset) -> Vec<usize> {
    let grid = model.grid();
    data.samples
        .par_iter()
        .map(|s| grid.nearest_index(&s.label))
        .collect()
}

/// Train `model` in place. With `out`, writes the metrics log, a checkpoint
/// every `checkpoint_every` epochs and a final checkpoint.
pub fn train(
    model: &mut Model,
    cfg: &TrainConfig,
    data: &Dataset,
    out: Option<&TrainOutput>,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training dataset".into()));
    }
    let start = Instant::now();
    let targets = label_targets(model, data);
    let mut params = model.params();
    let mut opt = Optimizer::new(cfg.optimizer, params.len(), cfg.momentum);
    let mut report = TrainReport::default();
    let mut metrics = match out {
        Some(o) => {
            std::fs::create_dir_all(&o.dir)?;
            Some(BufWriter::new(File::create(o.metrics())?))
        }
        None => None,
    };
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..data.len()).collect();
    'epochs: for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0;
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break;
            }
            let prep = model.prepare();
            let stream = (1u64 << 40) + (step as u64) * (cfg.batch_size as u64);
            let (loss, raw) = batch_gradient(model, &prep, data, batch, &targets, cfg.seed, stream)?;
            let grad = model.finish_grad(&raw);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    epoch,
                    step,
                    detail: format!("loss {loss}, lr {lr}"),
                });
            }
            opt.step(&mut params, &grad, lr);
            model.set_params(&params)?;
            report.step_losses.push(loss);
            epoch_loss += loss;
            epoch_steps += 1;
            step += 1;
        }
        if epoch_steps == 0 {
            break 'epochs;
        }
        let rec = EpochRecord {
            epoch,
            steps: step,
            loss: epoch_loss / epoch_steps as f64,
            lr,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        if let Some(w) = metrics.as_mut() {
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        if let Some(o) = out {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                write_checkpoint(&o.epoch_checkpoint(epoch), model, cfg, epoch, step)?;
            }
        }
        progress(&rec);
        let done = cfg.max_steps.is_some_and(|m| step >= m);
        report.epochs.push(rec);
        if done {
            break;
        }
    }
    if let Some(o) = out {
        let epoch = report.epochs.last().map_or(0, |r| r.epoch);
        write_checkpoint(&o.final_checkpoint(), model, cfg, epoch, step)?;
    }
    Ok(report)
}

/// Path helper for callers that only have a directory.
pub fn output_in(dir: &Path) -> TrainOutput {
    TrainOutput {
        dir: dir.to_path_buf(),
    }
}
