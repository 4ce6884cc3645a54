use std::fs::File;
use std::io::{BufWriter, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Optimizer, TrainConfig};
use crate::augment::apply_recipe;
use crate::autodiff::{Graph, Tape, Tensor};
use crate::data::PointCloud;
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::model::{Batch, Model, Task};

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub train_loss: f64,
    /// Overall accuracy (classification) or mean IoU (segmentation) of training-mode
    /// predictions over the epoch.
    pub train_metric: f64,
    pub val_metric: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_metric: Option<f64>,
    pub steps: u64,
}

impl FitReport {
    pub fn final_train_metric(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.train_metric)
    }
}

/// Overall accuracy for classification, mean IoU for segmentation.
pub fn task_metric(task: Task, cm: &ConfusionMatrix) -> f64 {
    match task {
        Task::Classification => cm.overall_accuracy(),
        Task::Segmentation => cm.mean_iou(),
    }
}

fn argmax_rows(logits: &Tensor<f32>) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
        })
        .collect()
}

/// Eval-mode confusion matrix over labeled clouds.
pub fn evaluate(model: &Model, clouds: &[PointCloud], micro: usize) -> Result<ConfusionMatrix> {
    let k = model.config.num_classes;
    let mut cm = ConfusionMatrix::new(k);
    let logits = model.predict(clouds, micro)?;
    for (cloud, l) in clouds.iter().zip(&logits) {
        let pred = argmax_rows(l);
        match model.config.task {
            Task::Classification => {
                let gt = cloud.cloud_label().ok_or_else(|| Error::Input("cloud without a class label".into()))?;
                cm.add(gt as usize, pred[0])?;
            }
            Task::Segmentation => {
                let gt = cloud.point_labels().ok_or_else(|| Error::Input("cloud without point labels".into()))?;
                cm.add_all(&gt.iter().map(|&g| g as usize).collect::<Vec<_>>(), &pred)?;
            }
        }
    }
    Ok(cm)
}

/// Splits a shuffled epoch into batches; a trailing batch of one cloud joins the previous one.
fn epoch_batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().unwrap().len() == 1 {
        let n = out.len();
        let start = (n - 2) * size;
        out.truncate(n - 2);
        out.push(&order[start..]);
    }
    out
}

/// Trains `model` in place. With a validation set the parameters of the best validation
/// epoch are restored at the end.
pub fn fit(model: &mut Model, train: &[PointCloud], val: &[PointCloud], cfg: &TrainConfig) -> Result<FitReport> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    if model.config.task != cfg.task {
        return Err(Error::Config("model and training config disagree on the task".into()));
    }
    let task = cfg.task;
    let k = model.config.num_classes;
    for c in train.iter().chain(val) {
        c.validate(Some(k))?;
    }
    let mut log = match &cfg.log {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer.clone());
    let lr0 = cfg.optimizer.lr;
    let mut order: Vec<usize> = (0..train.len()).flat_map(|i| std::iter::repeat(i).take(cfg.repeat)).collect();
    let per_epoch = epoch_batches(&order, cfg.batch_size).len();
    let mut report = FitReport { epochs: Vec::new(), best_epoch: None, best_val_metric: None, steps: 0 };
    let mut best = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut cm = ConfusionMatrix::new(k);
        let (mut loss_sum, mut lr) = (0.0, lr0);
        let batches = epoch_batches(&order, cfg.batch_size);
        for (step, idx) in batches.iter().enumerate() {
            lr = cfg.schedule.lr_at(lr0, epoch as f64 + step as f64 / per_epoch as f64, cfg.epochs as f64);
            let clouds = idx.iter().map(|&i| apply_recipe(&train[i], &cfg.augment, &mut rng)).collect::<Result<Vec<_>>>()?;
            let batch = Batch::from_clouds(&clouds, &model.config.features, &mut rng)?;
            let (targets, weights) = match task {
                Task::Classification => {
                    (batch.cloud_labels.clone().ok_or_else(|| Error::Input("cloud without a class label".into()))?, None)
                }
                Task::Segmentation => (
                    batch.point_labels.clone().ok_or_else(|| Error::Input("cloud without point labels".into()))?,
                    Some(batch.mask.iter().map(|&m| if m { 1.0f32 } else { 0.0 }).collect::<Vec<_>>()),
                ),
            };
            let mut tape = Tape::new(&model.store, true);
            let logits = model.net.forward(&mut tape, &batch, &mut rng)?;
            let loss = cfg.loss.apply(&mut tape, &logits, &targets, weights.as_deref())?;
            let value = tape.value_of(loss) as f64;
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, step, loss: value });
            }
            let grads = tape.backward(loss)?;
            let updates = tape.take_norm_updates();
            let pred = argmax_rows(tape.value(&logits));
            drop(tape);
            match &weights {
                None => cm.add_all(&targets, &pred)?,
                Some(w) => {
                    for ((&t, &p), &wi) in targets.iter().zip(&pred).zip(w) {
                        if wi > 0.0 {
                            cm.add(t, p)?;
                        }
                    }
                }
            }
            model.store.apply_norm_updates(&updates);
            opt.step(&mut model.store, &grads, lr)?;
            loss_sum += value;
            report.steps += 1;
        }
        let val_metric = if val.is_empty() { None } else { Some(task_metric(task, &evaluate(model, val, cfg.batch_size)?)) };
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / batches.len() as f64,
            train_metric: task_metric(task, &cm),
            val_metric,
        };
        if let Some(w) = log.as_mut() {
            serde_json::to_writer(&mut *w, &record)?;
            writeln!(w)?;
            w.flush()?;
        }
        if let Some(v) = val_metric {
            if report.best_val_metric.map_or(true, |b| v > b) {
                report.best_val_metric = Some(v);
                report.best_epoch = Some(epoch);
                best = Some(model.store.clone());
            }
        }
        let done = cfg.stop_at_train_metric.is_some_and(|m| record.train_metric >= m);
        report.epochs.push(record);
        if done {
            break;
        }
    }
    if let Some(b) = best {
        model.store.load_from(&b)?;
    }
    Ok(report)
}
