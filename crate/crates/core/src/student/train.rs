use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::StudentConfig;
use super::model::Student;
use crate::checkpoint;
use crate::dataset;
use crate::error::{Error, Result};
use crate::eval::{self, softmax, ClipModel, EvalReport};
use crate::features::GazeInput;
use crate::gaze::{segment_gaze_clips, Recording, Split, DEFAULT_CLIPS};
use crate::nn::optim::{AdamW, Optimizer};
use crate::nn::{stream_rng, Graph, ParamRecord};
use crate::scalar::Scalar;
use crate::teacher::{Teacher, TeacherSample};

/// One training clip: gaze input, labels and the frozen teacher target.
#[derive(Debug, Clone)]
pub struct StudentSample<T> {
    pub clip_id: String,
    pub gaze: GazeInput<T>,
    pub label: usize,
    pub subtask: usize,
    /// Concatenated teacher embeddings, present when distilling.
    pub teacher: Option<Vec<T>>,
}

/// Loss terms of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub ce: f64,
    pub dis: f64,
    pub act: f64,
    pub total: f64,
}

impl<T: Scalar> Student<T> {
    /// Gaze inputs of a recording's clips; frames are never read.
    pub fn gaze_inputs(&self, rec: &Recording, n_clips: usize) -> Result<Vec<(String, GazeInput<T>)>> {
        segment_gaze_clips(rec, n_clips)?
            .iter()
            .map(|c| Ok((c.id(), GazeInput::from_clip(c)?)))
            .collect()
    }

    pub fn subtask_index(&self, name: &str) -> Result<usize> {
        if self.config.subtasks.is_empty() {
            return Ok(0);
        }
        self.config
            .subtasks
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::Config(format!("unknown subtask `{name}`")))
    }

    /// Builds the batch graph and returns the total loss node with its terms.
    pub fn batch_loss(&self, g: &mut Graph<T>, batch: &[&StudentSample<T>]) -> Result<(crate::nn::Var, LossTerms)> {
        let inputs: Vec<&GazeInput<T>> = batch.iter().map(|s| &s.gaze).collect();
        let vars = self.forward_graph(g, &inputs)?;
        let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
        let ce = g.cross_entropy(vars.skill_logits, &labels)?;
        let mut terms = vec![(ce, T::one())];
        let mut out = LossTerms {
            ce: g.scalar(ce).as_f64(),
            dis: 0.0,
            act: 0.0,
            total: 0.0,
        };
        let wd = self.config.dis_weight();
        if wd > 0.0 {
            let rows: Vec<&[T]> = batch
                .iter()
                .map(|s| {
                    s.teacher
                        .as_deref()
                        .ok_or_else(|| Error::Config(format!("clip {} has no teacher embedding", s.clip_id)))
                })
                .collect::<Result<_>>()?;
            let teacher = Array2::from_shape_fn((rows.len(), self.teacher_dim), |(i, j)| rows[i][j]);
            let dis = self.distillation_loss(g, vars.e_s_hat, &teacher)?;
            out.dis = g.scalar(dis).as_f64();
            terms.push((dis, T::of(wd)));
        }
        let wa = self.config.act_weight();
        if wa > 0.0 {
            let subtasks: Vec<usize> = batch.iter().map(|s| s.subtask).collect();
            let act = g.cross_entropy(vars.action_logits, &subtasks)?;
            out.act = g.scalar(act).as_f64();
            terms.push((act, T::of(wa)));
        }
        let total = g.weighted_sum(&terms);
        out.total = g.scalar(total).as_f64();
        Ok((total, out))
    }

    pub fn gaze_probabilities(&self, gaze: &GazeInput<T>) -> Result<Vec<f64>> {
        let out = self.forward(gaze)?;
        let logits: Vec<f64> = out.skill_logits.iter().map(|v| v.as_f64()).collect();
        Ok(softmax(&logits))
    }
}

impl<T: Scalar> ClipModel for Student<T> {
    fn k_classes(&self) -> usize {
        self.config.k_classes
    }

    fn clip_probabilities(&self, rec: &Recording, n_clips: usize) -> Result<Vec<Vec<f64>>> {
        self.gaze_inputs(rec, n_clips)?
            .iter()
            .map(|(_, g)| self.gaze_probabilities(g))
            .collect()
    }
}

/// Frozen teacher plus where its embeddings are cached.
pub struct TeacherSource<'a, T> {
    pub model: &'a Teacher<T>,
    /// Hex digest identifying the checkpoint.
    pub hash: String,
    pub cache_dir: Option<PathBuf>,
}

fn cache_path(dir: &Path, hash: &str, clip_id: &str) -> PathBuf {
    let safe: String = clip_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '.'
            }
        })
        .collect();
    dir.join(&hash[..hash.len().min(16)]).join(format!("{safe}.json"))
}

impl<T: Scalar> TeacherSource<'_, T> {
    /// Concatenated embeddings of every clip of `rec`, read from the cache
    /// when present.
    pub fn embeddings(&self, rec: &Recording, n_clips: usize) -> Result<Vec<(String, Vec<T>)>> {
        if let Some(dir) = &self.cache_dir {
            let ids: Vec<String> = segment_gaze_clips(rec, n_clips)?.iter().map(|c| c.id()).collect();
            let cached: Option<Vec<Vec<f64>>> = ids
                .iter()
                .map(|id| {
                    let p = cache_path(dir, &self.hash, id);
                    p.is_file()
                        .then(|| checkpoint::read_json::<Vec<f64>>(&p).ok())
                        .flatten()
                })
                .collect();
            if let Some(rows) = cached {
                return Ok(ids
                    .into_iter()
                    .zip(rows)
                    .map(|(id, r)| (id, r.into_iter().map(T::of).collect()))
                    .collect());
            }
        }
        let samples: Vec<TeacherSample<T>> = self.model.prepare(rec, n_clips)?;
        samples
            .iter()
            .map(|s| {
                let e = self.model.forward(&s.visual, &s.gaze, s.scenario)?;
                let row = e.concat(&self.model.config);
                if let Some(dir) = &self.cache_dir {
                    let as_f64: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
                    checkpoint::write_json_atomic(&cache_path(dir, &self.hash, &s.clip_id), &as_f64)?;
                }
                Ok((s.clip_id.clone(), row))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentEpochMetrics {
    pub epoch: usize,
    pub loss: LossTerms,
    pub val_accuracy: f64,
}

pub struct StudentOutcome<T> {
    pub model: Student<T>,
    pub best_epoch: usize,
    pub epochs: Vec<StudentEpochMetrics>,
}

/// Fills the subtask list from the data and checks labels.
pub fn resolve_subtasks(cfg: &mut StudentConfig, recordings: &[Recording]) -> Result<()> {
    if cfg.act_weight() > 0.0 {
        if let Some(r) = recordings.iter().find(|r| r.meta.subtask.trim().is_empty()) {
            return Err(Error::Config(format!(
                "recording {} has no subtask label but the action loss is enabled",
                r.id()
            )));
        }
    }
    if cfg.subtasks.is_empty() {
        cfg.subtasks = dataset::subtasks(recordings);
    }
    Ok(())
}

/// Trains the student on the train split. With distillation enabled the
/// teacher embeddings of every training clip are computed once up front;
/// the teacher itself is only borrowed immutably.
pub fn train_student<T: Scalar>(
    recordings: &[Recording],
    teacher: Option<&TeacherSource<'_, T>>,
    mut cfg: StudentConfig,
    mut on_epoch: impl FnMut(&StudentEpochMetrics),
) -> Result<StudentOutcome<T>> {
    resolve_subtasks(&mut cfg, recordings)?;
    crate::teacher::check_labels(recordings, cfg.k_classes)?;
    let train = dataset::split(recordings, Split::Train);
    let val = dataset::split(recordings, Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("student training needs train and val recordings".into()));
    }
    let teacher_dim = match teacher {
        Some(t) => {
            if t.model.config.k_classes != cfg.k_classes {
                return Err(Error::Config(format!(
                    "teacher has {} classes, student {}",
                    t.model.config.k_classes, cfg.k_classes
                )));
            }
            t.model.config.embedding_width()
        }
        None if cfg.dis_weight() > 0.0 => {
            return Err(Error::Config("distillation enabled but no teacher given".into()));
        }
        None => 1,
    };
    let mut model = Student::<T>::new(cfg.clone(), teacher_dim)?;
    if !cfg.train_teacher_projection {
        model.store.set_frozen(model.f_t.weight, true);
        model.store.set_frozen(model.f_t.bias, true);
    }
    let n_clips = cfg.train.clips_per_recording;
    let mut samples = Vec::new();
    for rec in &train {
        let subtask = model.subtask_index(&rec.meta.subtask)?;
        let inputs = model.gaze_inputs(rec, n_clips)?;
        let targets = match (teacher, cfg.dis_weight() > 0.0) {
            (Some(t), true) => Some(t.embeddings(rec, n_clips)?),
            _ => None,
        };
        for (i, (clip_id, gaze)) in inputs.into_iter().enumerate() {
            let teacher = match &targets {
                Some(rows) => {
                    let (tid, row) = &rows[i];
                    if tid != &clip_id {
                        return Err(Error::Shape(format!("teacher clip {tid} vs student clip {clip_id}")));
                    }
                    Some(row.clone())
                }
                None => None,
            };
            samples.push(StudentSample {
                clip_id,
                gaze,
                label: rec.meta.skill,
                subtask,
                teacher,
            });
        }
    }
    let val_inputs: Vec<Vec<GazeInput<T>>> = val
        .iter()
        .map(|r| {
            Ok(model
                .gaze_inputs(r, DEFAULT_CLIPS)?
                .into_iter()
                .map(|(_, g)| g)
                .collect())
        })
        .collect::<Result<_>>()?;
    let val_labels: Vec<usize> = val.iter().map(|r| r.meta.skill).collect();

    let mut opt = AdamW::new(cfg.optimizer, &model.store);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut best: Option<(f64, usize, Student<T>)> = None;
    let mut epochs = Vec::new();
    for epoch in 0..cfg.train.epochs {
        order.shuffle(&mut stream_rng(cfg.seed, &format!("student.shuffle.{epoch}")));
        let mut sum = LossTerms {
            ce: 0.0,
            dis: 0.0,
            act: 0.0,
            total: 0.0,
        };
        for chunk in order.chunks(cfg.train.batch_size) {
            let batch: Vec<&StudentSample<T>> = chunk.iter().map(|&i| &samples[i]).collect();
            let mut g = Graph::new();
            let (loss, terms) = model.batch_loss(&mut g, &batch)?;
            if !terms.total.is_finite() {
                return Err(Error::Diverged(format!("student loss {terms:?} at epoch {epoch}")));
            }
            let grads = g.backward(loss);
            model.store.zero_grad();
            model.store.accumulate(&grads);
            opt.step(&mut model.store);
            let w = batch.len() as f64 / samples.len() as f64;
            sum.ce += terms.ce * w;
            sum.dis += terms.dis * w;
            sum.act += terms.act * w;
            sum.total += terms.total * w;
        }
        let val_accuracy = accuracy_of(&model, &val_inputs, &val_labels)?;
        let m = StudentEpochMetrics {
            epoch,
            loss: sum,
            val_accuracy,
        };
        info!(
            "student epoch {epoch}: loss {:.4} val acc {:.3}",
            sum.total, val_accuracy
        );
        on_epoch(&m);
        if best.as_ref().map_or(true, |b| val_accuracy > b.0) {
            best = Some((val_accuracy, epoch, model.clone()));
        }
        epochs.push(m);
    }
    if samples.iter().all(|s| s.label == samples[0].label) {
        warn!("student training set has a single class");
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(StudentOutcome {
        model,
        best_epoch,
        epochs,
    })
}

fn accuracy_of<T: Scalar>(model: &Student<T>, recs: &[Vec<GazeInput<T>>], labels: &[usize]) -> Result<f64> {
    let mut ok = 0;
    for (clips, &label) in recs.iter().zip(labels) {
        let probs = clips
            .iter()
            .map(|g| model.gaze_probabilities(g))
            .collect::<Result<Vec<_>>>()?;
        ok += usize::from(eval::aggregate_clips(&probs)?.1 == label);
    }
    Ok(ok as f64 / labels.len() as f64)
}

pub fn evaluate_student<T: Scalar>(
    model: &Student<T>,
    recordings: &[Recording],
    reference: &[(String, usize)],
) -> Result<EvalReport> {
    eval::evaluate(model, recordings, DEFAULT_CLIPS, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentCheckpoint {
    pub config: StudentConfig,
    pub teacher_dim: usize,
    /// Digest of the teacher checkpoint used for distillation.
    pub teacher_hash: Option<String>,
    pub best_epoch: usize,
    pub params: Vec<ParamRecord>,
}

impl StudentCheckpoint {
    pub fn from_model<T: Scalar>(model: &Student<T>, teacher_hash: Option<String>, best_epoch: usize) -> Self {
        Self {
            config: model.config.clone(),
            teacher_dim: model.teacher_dim,
            teacher_hash,
            best_epoch,
            params: model.store.to_records(),
        }
    }

    pub fn into_model<T: Scalar>(&self) -> Result<Student<T>> {
        let mut model = Student::new(self.config.clone(), self.teacher_dim)?;
        model.store.load_records(&self.params)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::write_json_atomic(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        checkpoint::read_json(path.as_ref())
    }
}
