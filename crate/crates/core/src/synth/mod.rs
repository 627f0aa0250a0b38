//! Deterministic synthetic recordings with class-dependent gaze behavior
//! and procedurally drawn 64x64 frames.

mod draw;
mod profile;
mod trace;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::Roi;
use crate::error::{Error, Result};
use crate::gaze::{save_recording, FrameSource, FrameStorage, Recording, RecordingMeta, Split};
use crate::nn::stream_rng;

pub use draw::{class_color, draw_frame, SceneLayout};
pub use profile::{
    base_profile, default_rois, distillation_profiles, gaze_separable_profiles, shared_profiles, ClassProfile, Dist,
    SubtaskModifier,
};
pub use trace::{
    direction, planted_event_trace, profile_trace, project, ray_of, sample_at, EventScript, HeadMotion, PlantedFixation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Labels follow gaze statistics; frames carry no label information.
    GazeSeparable,
    /// Labels follow the color under the gaze point; gaze statistics are
    /// shared by all classes.
    VisuallySeparable,
    /// Labels follow the color under the gaze point, and gaze statistics
    /// shift weakly with the label in a subtask-dependent direction.
    Distillation,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaze-separable" => Ok(Self::GazeSeparable),
            "visually-separable" => Ok(Self::VisuallySeparable),
            "distillation" => Ok(Self::Distillation),
            other => Err(Error::Config(format!(
                "unknown task `{other}` (gaze-separable, visually-separable, distillation)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthTaskSpec {
    pub kind: TaskKind,
    pub n_per_class: usize,
    pub k_classes: usize,
    pub n_subtasks: usize,
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default = "default_gaze_rate")]
    pub gaze_rate_hz: f64,
    #[serde(default = "default_image_size")]
    pub image_size: u32,
    #[serde(default = "default_scenario")]
    pub scenario: String,
    /// Probability that a training recording's label is replaced by a
    /// uniformly drawn other class. Validation and test labels stay clean.
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default = "yes")]
    pub frames: bool,
}

fn default_duration() -> f64 {
    12.0
}
fn default_frame_rate() -> f64 {
    2.0
}
fn default_gaze_rate() -> f64 {
    30.0
}
fn default_image_size() -> u32 {
    64
}
fn default_scenario() -> String {
    "synth".into()
}
fn yes() -> bool {
    true
}

impl SynthTaskSpec {
    pub fn new(kind: TaskKind, n_per_class: usize, seed: u64) -> Self {
        Self {
            kind,
            n_per_class,
            k_classes: 2,
            n_subtasks: 2,
            seed,
            duration_s: default_duration(),
            frame_rate_hz: default_frame_rate(),
            gaze_rate_hz: default_gaze_rate(),
            image_size: default_image_size(),
            scenario: default_scenario(),
            label_noise: if kind == TaskKind::Distillation { 0.25 } else { 0.0 },
            frames: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 || self.k_classes < 2 || self.n_subtasks == 0 {
            return Err(Error::Config(
                "need n_per_class >= 1, k_classes >= 2, n_subtasks >= 1".into(),
            ));
        }
        if !(self.duration_s > 0.0 && self.frame_rate_hz > 0.0 && self.gaze_rate_hz > 0.0) {
            return Err(Error::Config("duration and rates must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise must be in [0, 1], got {}",
                self.label_noise
            )));
        }
        if self.image_size < 8 {
            return Err(Error::Config("image_size must be >= 8".into()));
        }
        Ok(())
    }

    pub fn subtask_names(&self) -> Vec<String> {
        (0..self.n_subtasks).map(|i| format!("subtask{i}")).collect()
    }

    /// Default profiles for the task kind.
    pub fn default_profiles(&self) -> Vec<ClassProfile> {
        match self.kind {
            TaskKind::GazeSeparable => gaze_separable_profiles(self.k_classes),
            TaskKind::VisuallySeparable => shared_profiles(self.k_classes),
            TaskKind::Distillation => distillation_profiles(self.k_classes, &self.subtask_names()),
        }
    }
}

/// Split of the `i`-th recording of a class: 3 of every 5 train, then one
/// val and one test.
pub fn split_of(i: usize) -> Split {
    match i % 5 {
        3 => Split::Val,
        4 => Split::Test,
        _ => Split::Train,
    }
}

/// Generated recording plus the label it was generated from.
#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub recording: Recording,
    /// Class used to generate gaze and frames; differs from `meta.skill`
    /// only for noisy training labels.
    pub true_class: usize,
}

/// Builds one recording in memory.
pub fn generate_recording(
    spec: &SynthTaskSpec,
    profiles: &[ClassProfile],
    rois: &[Roi],
    class: usize,
    index: usize,
) -> Result<SynthRecording> {
    let id = format!("c{class}_r{index:04}");
    let mut rng = stream_rng(spec.seed, &format!("recording/{id}"));
    let subtasks = spec.subtask_names();
    let subtask = subtasks[index % subtasks.len()].clone();
    let split = split_of(index);
    let gaze = profile_trace(
        &profiles[class],
        &subtask,
        rois,
        spec.duration_s,
        spec.gaze_rate_hz,
        &mut rng,
    )?;

    let mut skill = class;
    let flip: f64 = rng.gen();
    if split == Split::Train && flip < spec.label_noise {
        let other = rng.gen_range(0..spec.k_classes - 1);
        skill = if other >= class { other + 1 } else { other };
    }

    let frames = if spec.frames {
        let layout = SceneLayout::random(spec.k_classes, rois, &mut rng);
        let cue = match spec.kind {
            TaskKind::GazeSeparable => rng.gen_range(0..spec.k_classes),
            TaskKind::VisuallySeparable | TaskKind::Distillation => class,
        };
        let n = (spec.duration_s * spec.frame_rate_hz).round() as usize + 1;
        let times: Vec<f64> = (0..n).map(|i| i as f64 / spec.frame_rate_hz).collect();
        let images = times
            .iter()
            .map(|&t| {
                let s = gaze.samples()[gaze.nearest_index(t)];
                draw_frame(
                    &layout,
                    spec.image_size,
                    s.g2d,
                    class_color(cue, spec.k_classes),
                    &mut rng,
                )
            })
            .collect();
        Some(FrameSource {
            times,
            storage: FrameStorage::Memory(images),
        })
    } else {
        None
    };
    let meta = RecordingMeta {
        id,
        scenario: spec.scenario.clone(),
        subtask,
        skill,
        split,
        k_classes: spec.k_classes,
        up_axis: "y".into(),
        frame_rate_hz: spec.frame_rate_hz,
        gaze_rate_hz: Some(spec.gaze_rate_hz),
    };
    Ok(SynthRecording {
        recording: Recording { meta, frames, gaze },
        true_class: class,
    })
}

/// All recordings of a task, class-major.
pub fn generate_recordings(spec: &SynthTaskSpec, profiles: &[ClassProfile]) -> Result<Vec<SynthRecording>> {
    spec.validate()?;
    if profiles.len() != spec.k_classes {
        return Err(Error::Config(format!(
            "{} class profiles for {} classes",
            profiles.len(),
            spec.k_classes
        )));
    }
    let rois = default_rois();
    for p in profiles {
        p.validate(&rois)?;
    }
    let mut out = Vec::with_capacity(spec.k_classes * spec.n_per_class);
    for class in 0..spec.k_classes {
        for i in 0..spec.n_per_class {
            out.push(generate_recording(spec, profiles, &rois, class, i)?);
        }
    }
    Ok(out)
}

/// Writes every recording under `out` (one directory per recording) plus
/// `task.json` (spec and profiles) and `rois.json`.
pub fn generate_dataset(
    spec: &SynthTaskSpec,
    profiles: &[ClassProfile],
    out: impl AsRef<Path>,
) -> Result<Vec<SynthRecording>> {
    let out = out.as_ref();
    let recs = generate_recordings(spec, profiles)?;
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    for r in &recs {
        save_recording(&r.recording, out.join(r.recording.id()))?;
    }
    let task = serde_json::json!({ "spec": spec, "profiles": profiles });
    crate::checkpoint::write_json_atomic(&out.join("task.json"), &task)?;
    let rois = crate::analysis::RoiSpec {
        regions: default_rois(),
        transitions: None,
    };
    crate::checkpoint::write_json_atomic(&out.join("rois.json"), &rois)?;
    Ok(recs)
}
