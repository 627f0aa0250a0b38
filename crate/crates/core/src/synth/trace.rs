use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::profile::{ClassProfile, Dist};
use crate::analysis::Roi;
use crate::error::{Error, Result};
use crate::gaze::{GazeSample, GazeSequence, Quat};

/// Half field of view of the synthetic camera: `tan(45 deg) = 1`.
const TAN_HALF_FOV: f64 = 1.0;
const TARGET_MARGIN: f64 = 0.05;

/// Camera-frame unit ray (x right, y up, z forward) through image point
/// `(u, v)`, `v` growing downward.
pub fn ray_of(g2d: [f64; 2]) -> [f64; 3] {
    let x = (g2d[0] - 0.5) * 2.0 * TAN_HALF_FOV;
    let y = -(g2d[1] - 0.5) * 2.0 * TAN_HALF_FOV;
    let n = (x * x + y * y + 1.0).sqrt();
    [x / n, y / n, 1.0 / n]
}

/// Inverse of [`ray_of`] for rays in front of the camera.
pub fn project(dir: [f64; 3]) -> [f64; 2] {
    let z = dir[2].max(1e-9);
    [
        0.5 + dir[0] / z / (2.0 * TAN_HALF_FOV),
        0.5 - dir[1] / z / (2.0 * TAN_HALF_FOV),
    ]
}

/// Unit direction from azimuth (about +y, from +z towards +x) and elevation,
/// both in degrees.
pub fn direction(az_deg: f64, el_deg: f64) -> [f64; 3] {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    [el.cos() * az.sin(), el.sin(), el.cos() * az.cos()]
}

fn sample<R: Rng>(d: Dist, rng: &mut R) -> f64 {
    if d.std == 0.0 {
        d.mean
    } else {
        Normal::new(d.mean, d.std).expect("finite std").sample(rng)
    }
}

fn gauss<R: Rng>(std: f64, rng: &mut R) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    }
}

/// Head pose parameters of one recording.
#[derive(Debug, Clone, Copy)]
pub struct HeadMotion {
    pub yaw0_deg: f64,
    pub amplitude_deg: f64,
    pub freq_hz: f64,
    pub phase: f64,
    pub pitch_deg: f64,
    pub start: [f64; 3],
    /// Horizontal walking velocity (m/s).
    pub velocity: [f64; 2],
}

impl HeadMotion {
    pub fn random<R: Rng>(amplitude_deg: f64, rng: &mut R) -> Self {
        Self {
            yaw0_deg: rng.gen_range(-180.0..180.0),
            amplitude_deg,
            freq_hz: rng.gen_range(0.1..0.3),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            pitch_deg: rng.gen_range(-10.0..0.0),
            start: [rng.gen_range(-3.0..3.0), 1.6, rng.gen_range(-3.0..3.0)],
            velocity: [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)],
        }
    }

    pub fn pose(&self, t: f64) -> (Quat, [f64; 3]) {
        let yaw = self.yaw0_deg + self.amplitude_deg * (std::f64::consts::TAU * self.freq_hz * t + self.phase).sin();
        let pitch = Quat::from_axis_angle([1.0, 0.0, 0.0], -self.pitch_deg.to_radians());
        let rot = Quat::yaw(yaw.to_radians()).mul(pitch).normalized();
        let trans = [
            self.start[0] + self.velocity[0] * t,
            self.start[1] + 0.01 * (std::f64::consts::TAU * 1.8 * t).sin(),
            self.start[2] + self.velocity[1] * t,
        ];
        (rot, trans)
    }
}

/// Builds a full sample from the image-plane gaze point, depth and pose.
pub fn sample_at(time_s: f64, g2d: [f64; 2], depth_m: f64, rot: Quat, trans: [f64; 3]) -> GazeSample {
    let g2d = [g2d[0].clamp(0.0, 1.0), g2d[1].clamp(0.0, 1.0)];
    let dir3d = ray_of(g2d);
    let world = rot.rotate(dir3d);
    GazeSample {
        time_s,
        fix3d: [
            trans[0] + world[0] * depth_m,
            trans[1] + world[1] * depth_m,
            trans[2] + world[2] * depth_m,
        ],
        dir3d,
        g2d,
        depth_m,
        rot,
        trans,
        valid: true,
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Samples a gaze trace of `duration_s` at `rate_hz` from a class profile.
pub fn profile_trace<R: Rng>(
    profile: &ClassProfile,
    subtask: &str,
    rois: &[Roi],
    duration_s: f64,
    rate_hz: f64,
    rng: &mut R,
) -> Result<GazeSequence> {
    let m = profile.modifier(subtask);
    let head = HeadMotion::random(profile.head_motion_deg * m.head_motion_scale, rng);
    let fix_dist = Dist::new(
        profile.fixation_duration_s.mean * m.fixation_scale,
        profile.fixation_duration_s.std * m.fixation_scale,
    );
    let depth_dist = Dist::new(profile.depth_m.mean + m.depth_offset_m, profile.depth_m.std);
    let names: Vec<&String> = profile.roi_dwell.keys().collect();
    let weights: Vec<f64> = profile.roi_dwell.values().copied().collect();
    let roi_dist =
        rand::distributions::WeightedIndex::new(&weights).map_err(|e| Error::Config(format!("roi_dwell: {e}")))?;
    let pick_target = |rng: &mut R| -> [f64; 2] {
        let name = names[roi_dist.sample(rng)];
        let rect = rois
            .iter()
            .find(|r| &r.name == name)
            .map(|r| r.rect)
            .unwrap_or([0.0, 0.0, 1.0, 1.0]);
        [rng.gen_range(rect[0]..rect[2]), rng.gen_range(rect[1]..rect[3])]
    };

    // Fixation script: (start, end, point, depth); saccades fill the gaps.
    let mut script: Vec<(f64, f64, [f64; 2], f64)> = Vec::new();
    let mut t = 0.0;
    let mut point = pick_target(rng);
    while t <= duration_s {
        let d = sample(fix_dist, rng).max(0.1);
        let depth = sample(depth_dist, rng).max(0.2);
        script.push((t, t + d, point, depth));
        let candidate = pick_target(rng);
        let amp_deg = sample(profile.saccade_amplitude_deg, rng).abs().max(0.5);
        // Degrees to image units near the center: 2 * tan(45 deg) spans 1.
        let max_step = amp_deg.to_radians().tan() / (2.0 * TAN_HALF_FOV);
        let delta = [candidate[0] - point[0], candidate[1] - point[1]];
        let len = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt();
        let s = if len > max_step { max_step / len } else { 1.0 };
        let lo = TARGET_MARGIN;
        let hi = 1.0 - TARGET_MARGIN;
        let next = [
            (point[0] + delta[0] * s).clamp(lo, hi),
            (point[1] + delta[1] * s).clamp(lo, hi),
        ];
        t += d + profile.saccade_base_s + 0.002 * amp_deg;
        point = next;
    }

    let n = (duration_s * rate_hz).round() as usize + 1;
    let noise = profile.noise_deg.to_radians().tan() / (2.0 * TAN_HALF_FOV);
    let mut samples = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = i as f64 / rate_hz;
        while k + 1 < script.len() && script[k + 1].0 <= t {
            k += 1;
        }
        let (_, end, p, depth) = script[k];
        let (g, dep) = if t <= end || k + 1 >= script.len() {
            (p, depth)
        } else {
            let (next_start, _, q, next_depth) = script[k + 1];
            let a = smoothstep((t - end) / (next_start - end));
            (
                [p[0] + (q[0] - p[0]) * a, p[1] + (q[1] - p[1]) * a],
                depth + (next_depth - depth) * a,
            )
        };
        let g = [g[0] + gauss(noise, rng), g[1] + gauss(noise, rng)];
        let (rot, trans) = head.pose(t);
        samples.push(sample_at(t, g, dep, rot, trans));
    }
    GazeSequence::new(samples, rate_hz)
}

/// One scripted fixation: gaze held at `(az_deg, el_deg)` over
/// `[start_s, end_s]`. Between fixations the direction moves linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedFixation {
    pub start_s: f64,
    pub end_s: f64,
    pub az_deg: f64,
    pub el_deg: f64,
    pub depth_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScript {
    pub fixations: Vec<PlantedFixation>,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Per-axis angular noise (degrees).
    pub noise_deg: f64,
    pub seed: u64,
}

impl EventScript {
    /// Direction and depth at `t` without noise.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        let f = &self.fixations;
        let Some(first) = f.first() else {
            return (0.0, 0.0, 1.0);
        };
        if t <= first.start_s {
            return (first.az_deg, first.el_deg, first.depth_m);
        }
        for (i, e) in f.iter().enumerate() {
            if t <= e.end_s {
                return (e.az_deg, e.el_deg, e.depth_m);
            }
            if let Some(n) = f.get(i + 1) {
                if t < n.start_s {
                    let a = (t - e.end_s) / (n.start_s - e.end_s);
                    return (
                        e.az_deg + (n.az_deg - e.az_deg) * a,
                        e.el_deg + (n.el_deg - e.el_deg) * a,
                        e.depth_m + (n.depth_m - e.depth_m) * a,
                    );
                }
            }
        }
        let last = f[f.len() - 1];
        (last.az_deg, last.el_deg, last.depth_m)
    }
}

/// Realizes an event script as a gaze sequence with a fixed head pose.
pub fn planted_event_trace(script: &EventScript) -> Result<GazeSequence> {
    if !(script.rate_hz > 0.0) || !(script.duration_s >= 0.0) {
        return Err(Error::Config(
            "event script needs rate_hz > 0 and duration_s >= 0".into(),
        ));
    }
    for w in script.fixations.windows(2) {
        if w[1].start_s <= w[0].end_s {
            return Err(Error::Config(format!(
                "scripted fixations overlap: [{}, {}] and [{}, {}]",
                w[0].start_s, w[0].end_s, w[1].start_s, w[1].end_s
            )));
        }
    }
    if let Some(e) = script.fixations.iter().find(|e| e.end_s < e.start_s) {
        return Err(Error::Config(format!(
            "fixation ends before it starts at {}",
            e.start_s
        )));
    }
    let mut rng = crate::nn::stream_rng(script.seed, "planted");
    let n = (script.duration_s * script.rate_hz).round() as usize + 1;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / script.rate_hz;
            let (az, el, depth) = script.at(t);
            let az = az + gauss(script.noise_deg, &mut rng);
            let el = el + gauss(script.noise_deg, &mut rng);
            let dir3d = direction(az, el);
            GazeSample {
                time_s: t,
                fix3d: [dir3d[0] * depth, dir3d[1] * depth, dir3d[2] * depth],
                dir3d,
                g2d: {
                    let p = project(dir3d);
                    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
                },
                depth_m: depth,
                rot: Quat::IDENTITY,
                trans: [0.0; 3],
                valid: true,
            }
        })
        .collect();
    GazeSequence::new(samples, script.rate_hz)
}
