use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{PatchDataset, Split, TrainConfig, TrainingError};
use crate::autodiff::{AdamConfig, ParamGrads};
use crate::network::{Model, NetworkError};
use crate::seed::derive_seed;

/// `max(floor, lr₀ · decay^⌊epoch / period⌋)` for a 0-based epoch.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> f64 {
    let k = (epoch / config.lr_decay_every_epochs) as i32;
    (config.lr_initial * config.decay_factor.powi(k)).max(config.lr_floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub step: usize,
    pub epoch: usize,
    pub tag: String,
    pub loss: f64,
}

/// Per-step batch losses (tag `batch`) and per-epoch means per dataset tag.
///
/// Epoch 0 rows hold the untrained model's losses; epoch `e ≥ 1` rows are
/// written after the `e`-th pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossLog {
    pub rows: Vec<LossRow>,
}

impl LossLog {
    fn push(&mut self, step: usize, epoch: usize, tag: &str, loss: f64) {
        debug_assert!(self.rows.last().map_or(true, |r| r.step <= step));
        self.rows.push(LossRow {
            step,
            epoch,
            tag: tag.to_string(),
            loss,
        });
    }

    pub fn tagged<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a LossRow> + 'a {
        self.rows.iter().filter(move |r| r.tag == tag)
    }

    pub fn last(&self, tag: &str) -> Option<f64> {
        self.tagged(tag).last().map(|r| r.loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,epoch,tag,loss\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.step, r.epoch, r.tag, r.loss);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainingError> {
        std::fs::write(path, self.to_csv()).map_err(|source| TrainingError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest selection loss seen at an epoch end.
    pub best: Model,
    pub best_epoch: usize,
    pub best_loss: f64,
    /// Parameters after the final step.
    pub last: Model,
    pub log: LossLog,
    pub steps: usize,
    /// True when the best checkpoint was chosen on validation loss, false
    /// when there was no validation data and the training loss was used.
    pub selected_on_validation: bool,
}

/// Called after every epoch with the 1-based epoch number.
pub type EpochCallback<'a> = dyn FnMut(usize, &Model) -> Result<(), TrainingError> + 'a;

fn mean_loss(model: &Model, dataset: &PatchDataset, indices: &[usize]) -> Result<f64, TrainingError> {
    let losses: Vec<Result<f64, NetworkError>> = indices
        .par_iter()
        .map(|&i| model.loss_tensor(&dataset.records[i].input()))
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / indices.len() as f64)
}

/// Batches of equal row count, in a seeded order.
fn epoch_batches(dataset: &PatchDataset, train: &[usize], batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = train.to_vec();
    order.shuffle(&mut rng);
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in order {
        buckets.entry(dataset.records[i].ppfs.len()).or_default().push(i);
    }
    let mut batches: Vec<Vec<usize>> = buckets
        .into_values()
        .flat_map(|b| b.chunks(batch_size).map(<[usize]>::to_vec).collect::<Vec<_>>())
        .collect();
    batches.shuffle(&mut rng);
    batches
}

/// Mean loss and mean gradient over a batch. Patches are evaluated in
/// parallel in groups; the reduction runs in batch order.
fn batch_gradient(model: &Model, dataset: &PatchDataset, batch: &[usize]) -> Result<(f64, ParamGrads), NetworkError> {
    let group = rayon::current_num_threads().max(1);
    let mut total = 0.0;
    let mut acc = model.params().zero_grads();
    for chunk in batch.chunks(group) {
        let results: Vec<Result<(f64, ParamGrads), NetworkError>> = chunk
            .par_iter()
            .map(|&i| model.loss_and_grads(&dataset.records[i].input()))
            .collect();
        for r in results {
            let (loss, g) = r?;
            total += loss;
            acc.add_assign(&g);
        }
    }
    let k = 1.0 / batch.len() as f64;
    acc.scale_assign(k);
    Ok((total * k, acc))
}

/// Trains on the dataset's train split, evaluating the validation split and
/// every extra tagged dataset after each epoch.
pub fn train(
    mut model: Model,
    dataset: &PatchDataset,
    config: &TrainConfig,
    extra: &[(String, PatchDataset)],
    mut on_epoch: Option<&mut EpochCallback<'_>>,
) -> Result<TrainOutcome, TrainingError> {
    config.validate()?;
    let train_idx = dataset.indices(Split::Train);
    let val_idx = dataset.indices(Split::Validation);
    if train_idx.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let adam = AdamConfig::default();
    let mut log = LossLog::default();
    let evaluate =
        |model: &Model, log: &mut LossLog, step: usize, epoch: usize| -> Result<Option<f64>, TrainingError> {
            let val = if val_idx.is_empty() {
                None
            } else {
                let v = mean_loss(model, dataset, &val_idx)?;
                log.push(step, epoch, "validation", v);
                Some(v)
            };
            for (tag, set) in extra {
                let all: Vec<usize> = (0..set.len()).collect();
                if !all.is_empty() {
                    log.push(step, epoch, tag, mean_loss(model, set, &all)?);
                }
            }
            Ok(val)
        };

    log.push(0, 0, "train", mean_loss(&model, dataset, &train_idx)?);
    evaluate(&model, &mut log, 0, 0)?;

    let mut step = 0;
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch);
        let batches = epoch_batches(
            dataset,
            &train_idx,
            config.batch_size,
            derive_seed(config.seed, epoch as u64),
        );
        let mut epoch_total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let nan = || TrainingError::NanLoss {
                epoch: epoch + 1,
                batch: b,
                patches: batch.clone(),
            };
            let (loss, grads) = match batch_gradient(&model, dataset, batch) {
                Ok(r) => r,
                Err(NetworkError::NonFinite(_)) => return Err(nan()),
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(nan());
            }
            model
                .params_mut()
                .adam_step(&grads, lr, &adam)
                .map_err(NetworkError::from)?;
            step += 1;
            epoch_total += loss * batch.len() as f64;
            log.push(step, epoch + 1, "batch", loss);
        }
        let train_loss = epoch_total / train_idx.len() as f64;
        log.push(step, epoch + 1, "train", train_loss);
        let val = evaluate(&model, &mut log, step, epoch + 1)?;
        let selection = val.unwrap_or(train_loss);
        if best.as_ref().map_or(true, |(l, _, _)| selection < *l) {
            best = Some((selection, epoch + 1, model.clone()));
        }
        if let Some(cb) = on_epoch.as_deref_mut() {
            cb(epoch + 1, &model)?;
        }
    }
    let (best_loss, best_epoch, best_model) = best.unwrap_or_else(|| {
        let l = log.last("train").unwrap_or(f64::INFINITY);
        (l, 0, model.clone())
    });
    Ok(TrainOutcome {
        best: best_model,
        best_epoch,
        best_loss,
        last: model,
        log,
        steps: step,
        selected_on_validation: !val_idx.is_empty(),
    })
}
