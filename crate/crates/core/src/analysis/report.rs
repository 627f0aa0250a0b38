use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fixations::{detect_fixations_with, FixationEvent, FixationKind, FixationParams};
use super::saccades::saccade_stats;
use super::stats::Summary;
use crate::error::{Error, Result};
use crate::gaze::GazeSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roi {
    pub name: String,
    /// `[u_min, v_min, u_max, v_max]` in normalized image coordinates.
    pub rect: [f64; 4],
}

impl Roi {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.rect[0] && p[0] <= self.rect[2] && p[1] >= self.rect[1] && p[1] <= self.rect[3]
    }
}

/// Named regions of interest; `transitions`, when given, restricts the
/// reported transition counts to those ordered pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiSpec {
    pub regions: Vec<Roi>,
    #[serde(default)]
    pub transitions: Option<Vec<(String, String)>>,
}

impl RoiSpec {
    pub fn validate(&self) -> Result<()> {
        let known = |n: &str| self.regions.iter().any(|r| r.name == n);
        for (i, r) in self.regions.iter().enumerate() {
            if self.regions[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::Config(format!("duplicate ROI name `{}`", r.name)));
            }
        }
        for (a, b) in self.transitions.iter().flatten() {
            for name in [a, b] {
                if !known(name) {
                    return Err(Error::Config(format!("unknown ROI name `{name}` in transitions")));
                }
            }
        }
        Ok(())
    }

    /// First region containing the point.
    pub fn locate(&self, p: [f64; 2]) -> Option<&str> {
        self.regions.iter().find(|r| r.contains(p)).map(|r| r.name.as_str())
    }
}

pub fn transition_key(from: &str, to: &str) -> String {
    format!("{from}->{to}")
}

/// Aggregate gaze statistics for one group of recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n_recordings: usize,
    pub fixations_per_recording: Summary,
    pub fixation_duration_s: Summary,
    pub movement_related_fixations: usize,
    pub exploratory_fixations: usize,
    pub saccade_amplitude_deg: Summary,
    pub saccade_peak_speed_deg_s: Summary,
    pub gaze_depth_m: Summary,
    /// Per recording: trace of the covariance of valid 3D fixation points.
    pub gaze_point_variance_m2: Summary,
    pub roi_dwell: BTreeMap<String, usize>,
    pub roi_transitions: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeStatsReport {
    pub params: FixationParams,
    pub groups: BTreeMap<usize, GroupStats>,
}

/// Per-recording raw material; grouped stats are summaries over the union.
struct RecordingStats {
    n_fixations: f64,
    durations: Vec<f64>,
    kinds: (usize, usize),
    amplitudes: Vec<f64>,
    peaks: Vec<f64>,
    depths: Vec<f64>,
    point_variance: Option<f64>,
    dwell: BTreeMap<String, usize>,
    transitions: BTreeMap<String, usize>,
}

fn recording_stats(seq: &GazeSequence, roi: &RoiSpec, params: &FixationParams) -> RecordingStats {
    let fixations = detect_fixations_with(seq, params);
    let sacc = saccade_stats(seq, &fixations);
    let valid: Vec<_> = seq.samples().iter().filter(|s| s.valid).collect();
    let point_variance = if valid.len() >= 2 {
        let n = valid.len() as f64;
        let mut total = 0.0;
        for k in 0..3 {
            let mean = valid.iter().map(|s| s.fix3d[k]).sum::<f64>() / n;
            total += valid.iter().map(|s| (s.fix3d[k] - mean).powi(2)).sum::<f64>() / n;
        }
        Some(total)
    } else {
        None
    };
    let (dwell, transitions) = roi_counts(&fixations, roi);
    RecordingStats {
        n_fixations: fixations.len() as f64,
        durations: fixations.iter().map(FixationEvent::duration_s).collect(),
        kinds: (
            fixations
                .iter()
                .filter(|f| f.kind == FixationKind::MovementRelated)
                .count(),
            fixations.iter().filter(|f| f.kind == FixationKind::Exploratory).count(),
        ),
        amplitudes: sacc.saccades.iter().map(|s| s.amplitude_deg).collect(),
        peaks: sacc.saccades.iter().map(|s| s.peak_speed_deg_s).collect(),
        depths: valid.iter().map(|s| s.depth_m).collect(),
        point_variance,
        dwell,
        transitions,
    }
}

fn roi_counts(fixations: &[FixationEvent], roi: &RoiSpec) -> (BTreeMap<String, usize>, BTreeMap<String, usize>) {
    let mut dwell = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    if let Some(pairs) = &roi.transitions {
        for (a, b) in pairs {
            transitions.insert(transition_key(a, b), 0);
        }
    }
    let mut prev: Option<&str> = None;
    for f in fixations {
        let Some(here) = roi.locate(f.centroid_g2d) else {
            continue;
        };
        *dwell.entry(here.to_string()).or_insert(0) += 1;
        if let Some(p) = prev.filter(|&p| p != here) {
            let key = transition_key(p, here);
            match &roi.transitions {
                Some(_) => {
                    if let Some(c) = transitions.get_mut(&key) {
                        *c += 1;
                    }
                }
                None => *transitions.entry(key).or_insert(0) += 1,
            }
        }
        prev = Some(here);
    }
    (dwell, transitions)
}

fn merge_counts(into: &mut BTreeMap<String, usize>, from: &BTreeMap<String, usize>) {
    for (k, v) in from {
        *into.entry(k.clone()).or_insert(0) += v;
    }
}

fn aggregate(stats: &[RecordingStats]) -> GroupStats {
    let cat =
        |f: fn(&RecordingStats) -> &Vec<f64>| -> Vec<f64> { stats.iter().flat_map(|s| f(s).iter().copied()).collect() };
    let mut dwell = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    for s in stats {
        merge_counts(&mut dwell, &s.dwell);
        merge_counts(&mut transitions, &s.transitions);
    }
    GroupStats {
        n_recordings: stats.len(),
        fixations_per_recording: Summary::of(&stats.iter().map(|s| s.n_fixations).collect::<Vec<_>>()),
        fixation_duration_s: Summary::of(&cat(|s| &s.durations)),
        movement_related_fixations: stats.iter().map(|s| s.kinds.0).sum(),
        exploratory_fixations: stats.iter().map(|s| s.kinds.1).sum(),
        saccade_amplitude_deg: Summary::of(&cat(|s| &s.amplitudes)),
        saccade_peak_speed_deg_s: Summary::of(&cat(|s| &s.peaks)),
        gaze_depth_m: Summary::of(&cat(|s| &s.depths)),
        gaze_point_variance_m2: Summary::of(&stats.iter().filter_map(|s| s.point_variance).collect::<Vec<_>>()),
        roi_dwell: dwell,
        roi_transitions: transitions,
    }
}

/// Statistics of a single sequence, in the same shape as one report group.
pub fn sequence_stats(seq: &GazeSequence, roi: &RoiSpec, params: &FixationParams) -> Result<GroupStats> {
    roi.validate()?;
    Ok(aggregate(&[recording_stats(seq, roi, params)]))
}

/// Per-class gaze statistics. `labels[i]` is the class (ground truth or
/// predicted) of `sequences[i]`.
pub fn group_report(
    sequences: &[&GazeSequence],
    labels: &[usize],
    roi: &RoiSpec,
    params: &FixationParams,
) -> Result<GazeStatsReport> {
    if sequences.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} recordings but {} labels",
            sequences.len(),
            labels.len()
        )));
    }
    roi.validate()?;
    let mut by_group: BTreeMap<usize, Vec<RecordingStats>> = BTreeMap::new();
    for (seq, &label) in sequences.iter().zip(labels) {
        by_group
            .entry(label)
            .or_default()
            .push(recording_stats(seq, roi, params));
    }
    Ok(GazeStatsReport {
        params: *params,
        groups: by_group.into_iter().map(|(k, v)| (k, aggregate(&v))).collect(),
    })
}
