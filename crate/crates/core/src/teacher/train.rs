use std::collections::BTreeMap;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::TeacherConfig;
use super::model::Teacher;
use crate::dataset;
use crate::error::{Error, Result};
use crate::eval::{self, softmax, ClipModel, EvalReport};
use crate::features::{GazeInput, VisualInput};
use crate::gaze::{segment_clips, Recording, Split};
use crate::nn::optim::{Optimizer, Sgd};
use crate::nn::{stream_rng, Graph, ParamRecord};
use crate::scalar::Scalar;

/// One clip turned into teacher inputs.
#[derive(Debug, Clone)]
pub struct TeacherSample<T> {
    pub clip_id: String,
    pub visual: VisualInput<T>,
    pub gaze: GazeInput<T>,
    pub scenario: usize,
    pub label: usize,
}

impl<T: Scalar> Teacher<T> {
    pub fn prepare(&self, rec: &Recording, n_clips: usize) -> Result<Vec<TeacherSample<T>>> {
        let scenario = self.config.attention.scenario_index(&rec.meta.scenario)?;
        segment_clips(rec, n_clips)?
            .iter()
            .map(|clip| {
                Ok(TeacherSample {
                    clip_id: clip.id(),
                    visual: VisualInput::from_clip(clip, self.geometry())?,
                    gaze: GazeInput::from_clip(clip)?,
                    scenario,
                    label: rec.meta.skill,
                })
            })
            .collect()
    }

    pub fn sample_probabilities(&self, s: &TeacherSample<T>) -> Result<Vec<f64>> {
        let out = self.forward(&s.visual, &s.gaze, s.scenario)?;
        let logits: Vec<f64> = out.logits.iter().map(|v| v.as_f64()).collect();
        Ok(softmax(&logits))
    }

    /// Mean cross-entropy of a batch and the number of clips whose argmax
    /// is correct; gradients accumulate into the store.
    pub fn accumulate_batch(&mut self, batch: &[&TeacherSample<T>]) -> Result<(f64, usize)> {
        let w = T::one() / T::of(batch.len() as f64);
        let mut total = 0.0;
        let mut correct = 0;
        for s in batch {
            let mut g = Graph::new();
            let vars = self.forward_graph(&mut g, &s.visual, &s.gaze, s.scenario)?;
            let logits: Vec<f64> = g.value(vars.logits).iter().map(|v| v.as_f64()).collect();
            correct += usize::from(eval::argmax_first(&logits) == s.label);
            let ce = g.cross_entropy(vars.logits, &[s.label])?;
            let loss = g.weighted_sum(&[(ce, w)]);
            total += g.scalar(ce).as_f64();
            let grads = g.backward(loss);
            self.store.accumulate(&grads);
        }
        Ok((total / batch.len() as f64, correct))
    }
}

impl<T: Scalar> ClipModel for Teacher<T> {
    fn k_classes(&self) -> usize {
        self.config.k_classes
    }

    fn clip_probabilities(&self, rec: &Recording, n_clips: usize) -> Result<Vec<Vec<f64>>> {
        self.prepare(rec, n_clips)?
            .iter()
            .map(|s| self.sample_probabilities(s))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_clip_accuracy: f64,
    pub val_accuracy: f64,
}

pub struct TrainOutcome<T> {
    /// Parameters of the best validation epoch.
    pub model: Teacher<T>,
    pub best_epoch: usize,
    pub epochs: Vec<EpochMetrics>,
}

/// Fills an empty scenario list from the data and checks coverage otherwise.
pub fn resolve_scenarios(cfg: &mut TeacherConfig, recordings: &[Recording]) -> Result<()> {
    let present = dataset::scenarios(recordings);
    if cfg.attention.scenarios.is_empty() {
        cfg.attention.scenarios = present;
        return Ok(());
    }
    for s in &present {
        cfg.attention.scenario_index(s)?;
    }
    Ok(())
}

pub fn check_labels(recordings: &[Recording], k: usize) -> Result<()> {
    for r in recordings {
        if r.meta.k_classes != k {
            return Err(Error::Config(format!(
                "recording {} declares {} classes, the model has {k}",
                r.id(),
                r.meta.k_classes
            )));
        }
    }
    Ok(())
}

/// Trains on the train split, selects the epoch with the best validation
/// accuracy (earliest on ties) and calls `on_epoch` after every epoch.
pub fn train_teacher<T: Scalar>(
    recordings: &[Recording],
    mut cfg: TeacherConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome<T>> {
    resolve_scenarios(&mut cfg, recordings)?;
    check_labels(recordings, cfg.k_classes)?;
    let train = dataset::split(recordings, Split::Train);
    let val = dataset::split(recordings, Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("teacher training needs train and val recordings".into()));
    }
    if train.iter().all(|r| r.meta.skill == train[0].meta.skill) {
        warn!("training set has a single class; the majority baseline is degenerate");
    }
    let mut model = Teacher::<T>::new(cfg.clone())?;
    let mut samples = Vec::new();
    for rec in &train {
        samples.extend(model.prepare(rec, cfg.train.clips_per_recording)?);
    }
    let val_samples: Vec<Vec<TeacherSample<T>>> = val
        .iter()
        .map(|r| model.prepare(r, crate::gaze::DEFAULT_CLIPS))
        .collect::<Result<_>>()?;
    let val_labels: Vec<usize> = val.iter().map(|r| r.meta.skill).collect();

    let mut opt = Sgd::new(cfg.optimizer, &model.store);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut best: Option<(f64, usize, Teacher<T>)> = None;
    let mut epochs = Vec::new();
    for epoch in 0..cfg.train.epochs {
        order.shuffle(&mut stream_rng(cfg.seed, &format!("teacher.shuffle.{epoch}")));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.train.batch_size) {
            let batch: Vec<&TeacherSample<T>> = chunk.iter().map(|&i| &samples[i]).collect();
            model.store.zero_grad();
            let (loss, ok) = model.accumulate_batch(&batch)?;
            correct += ok;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "teacher loss {loss} at epoch {epoch}; grad norm {}",
                    model.store.grad_norm()
                )));
            }
            loss_sum += loss * batch.len() as f64;
            opt.step(&mut model.store);
        }
        let val_accuracy = accuracy_of(&model, &val_samples, &val_labels)?;
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / samples.len() as f64,
            train_clip_accuracy: correct as f64 / samples.len() as f64,
            val_accuracy,
        };
        info!(
            "teacher epoch {epoch}: loss {:.4} train acc {:.3} val acc {:.3}",
            m.train_loss, m.train_clip_accuracy, m.val_accuracy
        );
        on_epoch(&m);
        if best.as_ref().map_or(true, |b| val_accuracy > b.0) {
            best = Some((val_accuracy, epoch, model.clone()));
        }
        epochs.push(m);
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        epochs,
    })
}

fn accuracy_of<T: Scalar>(model: &Teacher<T>, recs: &[Vec<TeacherSample<T>>], labels: &[usize]) -> Result<f64> {
    let mut ok = 0;
    for (clips, &label) in recs.iter().zip(labels) {
        let probs = clips
            .iter()
            .map(|s| model.sample_probabilities(s))
            .collect::<Result<Vec<_>>>()?;
        ok += usize::from(eval::aggregate_clips(&probs)?.1 == label);
    }
    Ok(ok as f64 / labels.len() as f64)
}

/// Evaluation with the standard 10-clip protocol; the majority baseline is
/// fitted on `reference` labels.
pub fn evaluate_teacher<T: Scalar>(
    model: &Teacher<T>,
    recordings: &[Recording],
    reference: &[(String, usize)],
) -> Result<EvalReport> {
    eval::evaluate(model, recordings, crate::gaze::DEFAULT_CLIPS, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherCheckpoint {
    pub config: TeacherConfig,
    pub lambdas: BTreeMap<String, f64>,
    pub best_epoch: usize,
    pub params: Vec<ParamRecord>,
}

impl TeacherCheckpoint {
    pub fn from_model<T: Scalar>(model: &Teacher<T>, best_epoch: usize) -> Self {
        Self {
            config: model.config.clone(),
            lambdas: model.lambdas().into_iter().collect(),
            best_epoch,
            params: model.store.to_records(),
        }
    }

    pub fn into_model<T: Scalar>(&self) -> Result<Teacher<T>> {
        let mut model = Teacher::new(self.config.clone())?;
        model.store.load_records(&self.params)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::checkpoint::write_json_atomic(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::checkpoint::read_json(path.as_ref())
    }
}
