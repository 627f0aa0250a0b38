//! Recording-level evaluation: clip probabilities are averaged per
//! recording and the argmax (lowest index on ties) is the prediction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::Recording;

/// Anything that maps a recording to per-clip class probabilities.
pub trait ClipModel {
    fn k_classes(&self) -> usize;
    fn clip_probabilities(&self, rec: &Recording, n_clips: usize) -> Result<Vec<Vec<f64>>>;
}

/// Index of the largest value, the first one on ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean of the clip probability vectors and its argmax.
pub fn aggregate_clips(clips: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
    let first = clips
        .first()
        .ok_or_else(|| Error::EmptyInput("no clip probabilities".into()))?;
    let k = first.len();
    let mut mean = vec![0.0; k];
    for p in clips {
        if p.len() != k {
            return Err(Error::Shape(format!("clip probabilities of length {} vs {k}", p.len())));
        }
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= clips.len() as f64;
    }
    let pred = argmax_first(&mean);
    Ok((mean, pred))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Most frequent label, the lowest on ties.
pub fn mode(labels: &[usize], k: usize) -> Option<usize> {
    if labels.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; k.max(labels.iter().max().map_or(0, |m| m + 1))];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Some(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingPrediction {
    pub id: String,
    pub scenario: String,
    pub truth: usize,
    pub predicted: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAccuracy {
    pub n: usize,
    pub accuracy: f64,
    /// Accuracy of always predicting the majority class.
    pub majority_vote: f64,
    pub majority_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub majority_vote: f64,
    pub per_scenario: BTreeMap<String, ScenarioAccuracy>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<RecordingPrediction>,
}

/// Majority-vote baseline per scenario. The majority class comes from
/// `reference` labels of the same scenario when any exist, otherwise from the
/// evaluated labels themselves. Returns `(correct, class)` per scenario.
pub fn majority_vote(
    evaluated: &[(String, usize)],
    reference: &[(String, usize)],
    k: usize,
) -> BTreeMap<String, (usize, usize)> {
    let mut by_scenario: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (s, l) in evaluated {
        by_scenario.entry(s).or_default().push(*l);
    }
    by_scenario
        .into_iter()
        .map(|(s, labels)| {
            let ref_labels: Vec<usize> = reference.iter().filter(|(r, _)| r == s).map(|(_, l)| *l).collect();
            let class = mode(&ref_labels, k).or_else(|| mode(&labels, k)).unwrap_or(0);
            let correct = labels.iter().filter(|&&l| l == class).count();
            (s.to_string(), (correct, class))
        })
        .collect()
}

/// Evaluates `model` on `recordings`. `reference` supplies the labels the
/// majority-vote baseline is fitted on (usually the training split).
pub fn evaluate<M: ClipModel + ?Sized>(
    model: &M,
    recordings: &[Recording],
    n_clips: usize,
    reference: &[(String, usize)],
) -> Result<EvalReport> {
    let k = model.k_classes();
    let mut predictions = Vec::with_capacity(recordings.len());
    for rec in recordings {
        let clips = model.clip_probabilities(rec, n_clips)?;
        let (probabilities, predicted) = aggregate_clips(&clips)?;
        predictions.push(RecordingPrediction {
            id: rec.id().to_string(),
            scenario: rec.meta.scenario.clone(),
            truth: rec.meta.skill,
            predicted,
            probabilities,
        });
    }
    report(predictions, reference, k)
}

/// Builds the report from finished predictions.
pub fn report(predictions: Vec<RecordingPrediction>, reference: &[(String, usize)], k: usize) -> Result<EvalReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("no predictions".into()));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in &predictions {
        if p.truth >= k || p.predicted >= k {
            return Err(Error::Shape(format!(
                "label {} or prediction {} outside {k} classes",
                p.truth, p.predicted
            )));
        }
        confusion[p.truth][p.predicted] += 1;
        let e = per.entry(p.scenario.clone()).or_default();
        e.0 += 1;
        e.1 += usize::from(p.truth == p.predicted);
    }
    let evaluated: Vec<(String, usize)> = predictions.iter().map(|p| (p.scenario.clone(), p.truth)).collect();
    let majority = majority_vote(&evaluated, reference, k);
    let n = predictions.len();
    let correct: usize = per.values().map(|v| v.1).sum();
    let majority_correct: usize = majority.values().map(|v| v.0).sum();
    let per_scenario = per
        .into_iter()
        .map(|(s, (count, ok))| {
            let (mc, class) = majority[&s];
            (
                s,
                ScenarioAccuracy {
                    n: count,
                    accuracy: ok as f64 / count as f64,
                    majority_vote: mc as f64 / count as f64,
                    majority_class: class,
                },
            )
        })
        .collect();
    Ok(EvalReport {
        n,
        accuracy: correct as f64 / n as f64,
        majority_vote: majority_correct as f64 / n as f64,
        per_scenario,
        confusion,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax_first(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax_first(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(mode(&[2, 1, 2, 1], 3), Some(1));
    }

    #[test]
    fn averaging_three_clips() {
        let clips = vec![vec![0.6, 0.4], vec![0.1, 0.9], vec![0.7, 0.3]];
        let (mean, pred) = aggregate_clips(&clips).unwrap();
        assert!((mean[0] - 1.4 / 3.0).abs() < 1e-12);
        assert_eq!(pred, 1);
    }
}
