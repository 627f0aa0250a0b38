//! Dispersion-threshold (I-DT) fixation detection over gaze-direction angles.

use serde::{Deserialize, Serialize};

use crate::gaze::{norm3, GazeSample, GazeSequence};

/// Tolerance on duration comparisons so a uniform time shift cannot flip a
/// window across the minimum-duration boundary through rounding.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixationKind {
    MovementRelated,
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub start_s: f64,
    pub end_s: f64,
    /// Index of the first and last sample inside the event.
    pub first: usize,
    pub last: usize,
    pub centroid_g2d: [f64; 2],
    /// Unit mean gaze direction over the event.
    pub centroid_dir: [f64; 3],
    pub mean_depth_m: f64,
    pub kind: FixationKind,
}

impl FixationEvent {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixationParams {
    pub dispersion_deg: f64,
    pub min_fixation_s: f64,
    /// Fixations at or closer than this depth are movement-related.
    pub movement_depth_m: f64,
}

impl Default for FixationParams {
    fn default() -> Self {
        Self {
            dispersion_deg: 1.5,
            min_fixation_s: 0.1,
            movement_depth_m: 1.0,
        }
    }
}

/// Azimuth and elevation (degrees) of a wearer-frame direction (+z forward,
/// +y up).
pub fn direction_angles(d: [f64; 3]) -> (f64, f64) {
    let n = norm3(d);
    let az = d[0].atan2(d[2]).to_degrees();
    let el = (d[1] / n).clamp(-1.0, 1.0).asin().to_degrees();
    (az, el)
}

pub fn angle_between_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    norm3(cross).atan2(dot).to_degrees()
}

#[derive(Clone, Copy)]
struct Extent {
    az: (f64, f64),
    el: (f64, f64),
}

impl Extent {
    fn new((az, el): (f64, f64)) -> Self {
        Self {
            az: (az, az),
            el: (el, el),
        }
    }

    fn push(&mut self, (az, el): (f64, f64)) {
        self.az = (self.az.0.min(az), self.az.1.max(az));
        self.el = (self.el.0.min(el), self.el.1.max(el));
    }

    fn dispersion(&self) -> f64 {
        (self.az.1 - self.az.0) + (self.el.1 - self.el.0)
    }
}

pub fn detect_fixations(seq: &GazeSequence, dispersion_deg: f64, min_fixation_s: f64) -> Vec<FixationEvent> {
    detect_fixations_with(
        seq,
        &FixationParams {
            dispersion_deg,
            min_fixation_s,
            ..FixationParams::default()
        },
    )
}

/// I-DT: a window starting at a valid sample is first grown to span
/// `min_fixation_s`; if its angular dispersion is within the threshold it
/// keeps growing until the next sample would exceed it, and becomes a
/// fixation. Otherwise the start advances by one sample. Windows never span
/// invalid samples.
pub fn detect_fixations_with(seq: &GazeSequence, params: &FixationParams) -> Vec<FixationEvent> {
    let samples = seq.samples();
    let n = samples.len();
    let angles: Vec<(f64, f64)> = samples.iter().map(|s| direction_angles(s.dir3d)).collect();
    let mut events = Vec::new();
    let mut i = 0;
    while i < n {
        if !samples[i].valid {
            i += 1;
            continue;
        }
        let mut ext = Extent::new(angles[i]);
        let mut j = i;
        let mut reached = samples[j].time_s - samples[i].time_s >= params.min_fixation_s - TIME_EPS;
        while !reached && j + 1 < n && samples[j + 1].valid {
            j += 1;
            ext.push(angles[j]);
            reached = samples[j].time_s - samples[i].time_s >= params.min_fixation_s - TIME_EPS;
        }
        if !reached || ext.dispersion() > params.dispersion_deg {
            i += 1;
            continue;
        }
        while j + 1 < n && samples[j + 1].valid {
            let mut grown = ext;
            grown.push(angles[j + 1]);
            if grown.dispersion() > params.dispersion_deg {
                break;
            }
            ext = grown;
            j += 1;
        }
        events.push(make_event(&samples[i..=j], i, params));
        i = j + 1;
    }
    events
}

fn make_event(window: &[GazeSample], first: usize, params: &FixationParams) -> FixationEvent {
    let k = window.len() as f64;
    let mut g = [0.0; 2];
    let mut d = [0.0; 3];
    let mut depth = 0.0;
    for s in window {
        g[0] += s.g2d[0];
        g[1] += s.g2d[1];
        for a in 0..3 {
            d[a] += s.dir3d[a];
        }
        depth += s.depth_m;
    }
    let dn = norm3(d);
    let mean_depth_m = depth / k;
    FixationEvent {
        start_s: window[0].time_s,
        end_s: window[window.len() - 1].time_s,
        first,
        last: first + window.len() - 1,
        centroid_g2d: [(g[0] / k).clamp(0.0, 1.0), (g[1] / k).clamp(0.0, 1.0)],
        centroid_dir: [d[0] / dn, d[1] / dn, d[2] / dn],
        mean_depth_m,
        kind: if mean_depth_m <= params.movement_depth_m {
            FixationKind::MovementRelated
        } else {
            FixationKind::Exploratory
        },
    }
}
