use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::Roi;
use crate::error::{Error, Result};

/// Normal distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dist {
    pub mean: f64,
    pub std: f64,
}

impl Dist {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }
}

/// Per-subtask adjustments applied on top of a class profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtaskModifier {
    #[serde(default)]
    pub depth_offset_m: f64,
    #[serde(default = "one")]
    pub fixation_scale: f64,
    #[serde(default = "one")]
    pub head_motion_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SubtaskModifier {
    fn default() -> Self {
        Self {
            depth_offset_m: 0.0,
            fixation_scale: 1.0,
            head_motion_scale: 1.0,
        }
    }
}

/// Generative gaze parameters of one skill class.
///
/// Fixation targets are chosen by picking a region from `roi_dwell`, drawing
/// a point inside it and moving towards it by at most one sampled saccade
/// amplitude. The saccade rate follows from the fixation and saccade
/// durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProfile {
    pub fixation_duration_s: Dist,
    pub saccade_amplitude_deg: Dist,
    /// Saccade duration grows linearly with amplitude from this base.
    pub saccade_base_s: f64,
    pub depth_m: Dist,
    /// Peak yaw excursion of the head oscillation.
    pub head_motion_deg: f64,
    /// Probability of choosing each named region as the next target.
    pub roi_dwell: BTreeMap<String, f64>,
    /// Gaze direction noise.
    pub noise_deg: f64,
    #[serde(default)]
    pub subtasks: BTreeMap<String, SubtaskModifier>,
}

impl ClassProfile {
    pub fn validate(&self, rois: &[Roi]) -> Result<()> {
        let dists = [self.fixation_duration_s, self.saccade_amplitude_deg, self.depth_m];
        if dists.iter().any(|d| !(d.std >= 0.0) || !d.mean.is_finite()) || self.noise_deg < 0.0 {
            return Err(Error::Config("profile standard deviations must be >= 0".into()));
        }
        if self.fixation_duration_s.mean <= 0.0 || self.saccade_base_s < 0.0 {
            return Err(Error::Config("fixation duration must be > 0".into()));
        }
        let total: f64 = self.roi_dwell.values().sum();
        if (total - 1.0).abs() > 1e-9 || self.roi_dwell.values().any(|&p| p < 0.0) {
            return Err(Error::Config(format!(
                "roi_dwell must be a distribution, sums to {total}"
            )));
        }
        for name in self.roi_dwell.keys() {
            if !rois.iter().any(|r| &r.name == name) {
                return Err(Error::Config(format!("roi_dwell names unknown region `{name}`")));
            }
        }
        Ok(())
    }

    pub fn modifier(&self, subtask: &str) -> SubtaskModifier {
        self.subtasks.get(subtask).copied().unwrap_or_default()
    }
}

/// Scene regions shared by every generated recording.
pub fn default_rois() -> Vec<Roi> {
    vec![
        Roi {
            name: "scene".into(),
            rect: [0.1, 0.1, 0.9, 0.45],
        },
        Roi {
            name: "tool".into(),
            rect: [0.1, 0.55, 0.45, 0.9],
        },
        Roi {
            name: "target".into(),
            rect: [0.55, 0.55, 0.9, 0.9],
        },
    ]
}

fn dwell(scene: f64, tool: f64, target: f64) -> BTreeMap<String, f64> {
    [("scene", scene), ("tool", tool), ("target", target)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// A neutral profile; every task kind starts from it.
pub fn base_profile() -> ClassProfile {
    ClassProfile {
        fixation_duration_s: Dist::new(0.35, 0.1),
        saccade_amplitude_deg: Dist::new(10.0, 3.0),
        saccade_base_s: 0.02,
        depth_m: Dist::new(1.25, 0.15),
        head_motion_deg: 5.0,
        roi_dwell: dwell(0.4, 0.3, 0.3),
        noise_deg: 0.1,
        subtasks: BTreeMap::new(),
    }
}

/// Interpolates between two endpoint values across `k` classes.
fn lerp(a: f64, b: f64, class: usize, k: usize) -> f64 {
    if k <= 1 {
        a
    } else {
        a + (b - a) * class as f64 / (k - 1) as f64
    }
}

/// Profiles whose gaze statistics separate the classes clearly.
pub fn gaze_separable_profiles(k: usize) -> Vec<ClassProfile> {
    (0..k)
        .map(|c| ClassProfile {
            fixation_duration_s: Dist::new(lerp(0.2, 0.55, c, k), 0.05),
            saccade_amplitude_deg: Dist::new(lerp(16.0, 6.0, c, k), 2.0),
            depth_m: Dist::new(lerp(1.1, 1.4, c, k), 0.1),
            head_motion_deg: lerp(10.0, 3.0, c, k),
            roi_dwell: dwell(lerp(0.6, 0.2, c, k), 0.2, lerp(0.2, 0.6, c, k)),
            ..base_profile()
        })
        .collect()
}

/// Identical gaze statistics for every class.
pub fn shared_profiles(k: usize) -> Vec<ClassProfile> {
    vec![base_profile(); k]
}

/// Weak class differences in gaze (depth and fixation duration), confounded
/// by a subtask-dependent depth offset; the subtask also shows in head
/// motion.
pub fn distillation_profiles(k: usize, subtasks: &[String]) -> Vec<ClassProfile> {
    let subtask_mods: BTreeMap<String, SubtaskModifier> = subtasks
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            (
                s.clone(),
                SubtaskModifier {
                    depth_offset_m: 0.15 * sign,
                    fixation_scale: 1.0,
                    head_motion_scale: if i % 2 == 0 { 0.4 } else { 2.0 },
                },
            )
        })
        .collect();
    (0..k)
        .map(|c| {
            let shift = lerp(-1.0, 1.0, c, k);
            let base = base_profile();
            ClassProfile {
                depth_m: Dist::new(base.depth_m.mean + 0.1 * shift, base.depth_m.std),
                fixation_duration_s: Dist::new(
                    base.fixation_duration_s.mean * (1.0 + 0.15 * shift),
                    base.fixation_duration_s.std,
                ),
                subtasks: subtask_mods.clone(),
                ..base
            }
        })
        .collect()
}
