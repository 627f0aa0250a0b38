use std::path::PathBuf;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::quat::Quat;
use crate::error::{Error, Result};

/// One eye-tracker + head-pose sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Seconds from recording start.
    pub time_s: f64,
    /// World-frame 3D fixation point (m), +y up.
    pub fix3d: [f64; 3],
    /// Unit gaze direction in the wearer-centric frame.
    pub dir3d: [f64; 3],
    /// Gaze projected onto the ego frame, normalized image coordinates.
    pub g2d: [f64; 2],
    pub depth_m: f64,
    /// Glasses orientation in the world frame.
    pub rot: Quat,
    /// Glasses position in the world frame (m).
    pub trans: [f64; 3],
    pub valid: bool,
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl GazeSample {
    /// Checks the per-sample invariants; `Err` carries the failing field and
    /// a reason.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !self.time_s.is_finite() {
            return Err(("t", "not finite".into()));
        }
        if !finite(&self.g2d) {
            return Err(("g2d", "not finite".into()));
        }
        let qn = self.rot.norm();
        if (qn - 1.0).abs() > 1e-6 {
            return Err(("quat", format!("quat not unit (|q| = {qn})")));
        }
        if !finite(&self.trans) {
            return Err(("trans", "not finite".into()));
        }
        if self.valid {
            let n = norm3(self.dir3d);
            if (n - 1.0).abs() > 1e-6 {
                return Err(("dir3d", format!("dir3d not unit (|d| = {n})")));
            }
            if !finite(&self.fix3d) {
                return Err(("fix3d", "not finite".into()));
            }
            if !(self.depth_m >= 0.0) || !self.depth_m.is_finite() {
                return Err(("depth", format!("depth must be finite and >= 0, got {}", self.depth_m)));
            }
        }
        Ok(())
    }

    /// A valid sample looking straight ahead from the origin.
    pub fn straight_ahead(time_s: f64) -> Self {
        Self {
            time_s,
            fix3d: [0.0, 0.0, 1.0],
            dir3d: [0.0, 0.0, 1.0],
            g2d: [0.5, 0.5],
            depth_m: 1.0,
            rot: Quat::IDENTITY,
            trans: [0.0; 3],
            valid: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeSequence {
    samples: Vec<GazeSample>,
    pub rate_hz: f64,
}

impl GazeSequence {
    pub fn new(samples: Vec<GazeSample>, rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("gaze sequence has no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if let Err((field, why)) = s.check() {
                return Err(Error::format(format!("gaze sample {i} ({field})"), why));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].time_s <= w[0].time_s) {
            return Err(Error::format(
                format!("gaze sample {}", i + 1),
                "timestamps must be strictly increasing",
            ));
        }
        Ok(Self { samples, rate_hz })
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_s(&self) -> f64 {
        self.samples[0].time_s
    }

    pub fn end_s(&self) -> f64 {
        self.samples[self.samples.len() - 1].time_s
    }

    /// Index of the sample closest in time to `t` (earlier index on ties).
    pub fn nearest_index(&self, t: f64) -> usize {
        nearest_time_index(self.samples.iter().map(|s| s.time_s), self.samples.len(), t)
    }

    pub fn first_valid(&self) -> Option<usize> {
        self.samples.iter().position(|s| s.valid)
    }

    /// Same samples with every timestamp shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| GazeSample {
                time_s: s.time_s + dt,
                ..*s
            })
            .collect();
        Self {
            samples,
            rate_hz: self.rate_hz,
        }
    }
}

pub(crate) fn nearest_time_index(times: impl Iterator<Item = f64> + Clone, len: usize, t: f64) -> usize {
    let sorted: Vec<f64> = times.collect();
    debug_assert_eq!(sorted.len(), len);
    let idx = sorted.partition_point(|&x| x < t);
    if idx == 0 {
        0
    } else if idx >= len {
        len - 1
    } else if (t - sorted[idx - 1]) <= (sorted[idx] - t) {
        idx - 1
    } else {
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMeta {
    pub id: String,
    pub scenario: String,
    pub subtask: String,
    pub skill: usize,
    pub split: Split,
    pub k_classes: usize,
    pub up_axis: String,
    pub frame_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_rate_hz: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum FrameStorage {
    Dir(PathBuf),
    Memory(Vec<RgbImage>),
}

/// Timestamped ego frames, loaded lazily when backed by a directory.
#[derive(Debug, Clone)]
pub struct FrameSource {
    pub times: Vec<f64>,
    pub storage: FrameStorage,
}

impl FrameSource {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn nearest_index(&self, t: f64) -> usize {
        nearest_time_index(self.times.iter().copied(), self.times.len(), t)
    }

    pub fn frame(&self, index: usize) -> Result<RgbImage> {
        match &self.storage {
            FrameStorage::Memory(images) => images
                .get(index)
                .cloned()
                .ok_or_else(|| Error::format("frames", format!("frame index {index} out of range"))),
            FrameStorage::Dir(dir) => {
                let path = dir.join(format!("frame_{index:06}.png"));
                let img = image::open(&path).map_err(|source| Error::Image {
                    path: path.clone(),
                    source,
                })?;
                Ok(img.to_rgb8())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Recording {
    pub meta: RecordingMeta,
    pub frames: Option<FrameSource>,
    pub gaze: GazeSequence,
}

impl Recording {
    pub fn id(&self) -> &str {
        &self.meta.id
    }

    /// Time span of the gaze stream. Clip timing depends on it alone, so
    /// gaze-only consumers see identical clips with or without frames.
    pub fn span(&self) -> (f64, f64) {
        (self.gaze.start_s(), self.gaze.end_s())
    }
}

/// 16 frames at 2 FPS with aligned gaze.
#[derive(Debug, Clone)]
pub struct Clip {
    pub recording_id: String,
    pub index: usize,
    pub frame_times: Vec<f64>,
    pub frames: Option<Vec<RgbImage>>,
    pub gaze: Vec<GazeSample>,
    pub padded: bool,
}

impl Clip {
    pub fn id(&self) -> String {
        format!("{}#{}", self.recording_id, self.index)
    }
}
