//! Dataset-level helpers shared by the training loops.

use std::collections::BTreeSet;

use crate::gaze::{Recording, Split};

pub fn split(recordings: &[Recording], which: Split) -> Vec<Recording> {
    recordings.iter().filter(|r| r.meta.split == which).cloned().collect()
}

/// Sorted distinct scenario names.
pub fn scenarios(recordings: &[Recording]) -> Vec<String> {
    recordings
        .iter()
        .map(|r| r.meta.scenario.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Sorted distinct subtask names.
pub fn subtasks(recordings: &[Recording]) -> Vec<String> {
    recordings
        .iter()
        .map(|r| r.meta.subtask.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// `(scenario, skill)` pairs, the input of the majority-vote baseline.
pub fn labels(recordings: &[Recording]) -> Vec<(String, usize)> {
    recordings
        .iter()
        .map(|r| (r.meta.scenario.clone(), r.meta.skill))
        .collect()
}
