//! Per-frame gaze feature rows with recording-specific bias removed.
//!
//! Positional features are expressed in a gravity-aligned frame
//! `(forward, lateral, up)`: world `+y` is up and the forward axis is the
//! horizontal direction chosen by each rule below. Rotations use the same
//! basis. Devices face `+z` in their own frame.

use ndarray::Array2;

use super::quat::Quat;
use super::types::{GazeSample, GazeSequence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row layout: `[fix3d(3), dir3d(3), g2d(2), depth(1), rel_rot(4), trans(3), valid(1)]`.
pub const FEATURE_WIDTH: usize = 17;

pub mod col {
    pub const FIX3D: usize = 0;
    pub const DIR3D: usize = 3;
    pub const G2D: usize = 6;
    pub const DEPTH: usize = 8;
    pub const REL_ROT: usize = 9;
    pub const TRANS: usize = 13;
    pub const VALID: usize = 16;
}

/// Horizontal motion below this (m) does not define a heading.
const MIN_HEADING_M: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGaze {
    pub rows: Vec<[f64; FEATURE_WIDTH]>,
    /// Frame-0 glasses orientation after yaw alignment (pitch and roll kept).
    pub anchor_rot: Quat,
}

impl NormalizedGaze {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_matrix<T: Scalar>(&self) -> Array2<T> {
        Array2::from_shape_fn((self.rows.len(), FEATURE_WIDTH), |(r, c)| T::of(self.rows[r][c]))
    }

    /// Reinterprets the rows as a world-frame sequence (`x` = lateral,
    /// `y` = up, `z` = forward) so that normalizing it again reproduces
    /// these rows.
    pub fn to_canonical_sequence(&self, times: &[f64]) -> Result<GazeSequence> {
        let samples = self
            .rows
            .iter()
            .zip(times)
            .map(|(r, &t)| {
                let q = &r[col::REL_ROT..col::REL_ROT + 4];
                GazeSample {
                    time_s: t,
                    fix3d: from_body([r[0], r[1], r[2]]),
                    dir3d: [r[3], r[4], r[5]],
                    g2d: [r[6], r[7]],
                    depth_m: r[8],
                    rot: Quat::new(q[0], q[2], q[3], q[1]),
                    trans: from_body([r[13], r[14], r[15]]),
                    valid: r[16] > 0.5,
                }
            })
            .collect();
        GazeSequence::new(samples, 0.0)
    }
}

fn from_body(v: [f64; 3]) -> [f64; 3] {
    [v[1], v[2], v[0]]
}

/// World y-up vector to `(forward, lateral, up)` given the forward heading
/// `(hx, hz)` in the horizontal plane. Zero heading means "world +z".
fn to_body(v: [f64; 3], heading: Option<(f64, f64)>) -> [f64; 3] {
    match heading {
        None => [v[2], v[0], v[1]],
        Some((hx, hz)) => {
            let r = hx.hypot(hz);
            // lateral = up x forward; written so the heading vector itself
            // maps to exactly zero lateral.
            [(v[0] * hx + v[2] * hz) / r, (v[0] * hz - v[2] * hx) / r, v[1]]
        }
    }
}

fn heading_of(x: f64, z: f64) -> Option<(f64, f64)> {
    if x.hypot(z) > MIN_HEADING_M {
        Some((x, z))
    } else {
        None
    }
}

fn quat_to_body(q: Quat) -> Quat {
    Quat::new(q.w, q.z, q.x, q.y)
}

/// Normalizes a full sequence. See [`normalize_samples`].
pub fn normalize_gaze(seq: &GazeSequence) -> Result<NormalizedGaze> {
    normalize_samples(seq.samples())
}

/// Applies the six per-modality rules:
///
/// - fixation points: centered by the mean of valid samples, then yawed so
///   the first centered point has zero lateral component;
/// - gaze direction: unchanged (already wearer-centric);
/// - 2D gaze: clamped to `[0, 1]`;
/// - depth: unchanged;
/// - glasses rotation: yaw of frame 0 removed (pitch/roll kept), every frame
///   expressed relative to frame 0;
/// - glasses translation: centered, with the first horizontal movement as
///   `+forward`.
///
/// Invalid eye samples hold the last valid eye values and carry `valid = 0`.
pub fn normalize_samples(samples: &[GazeSample]) -> Result<NormalizedGaze> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("gaze sequence has no samples".into()));
    }
    if !samples[0].valid {
        return match samples.iter().position(|s| s.valid) {
            Some(first_valid) => Err(Error::InvalidAnchor { first_valid }),
            None => Err(Error::AllInvalid),
        };
    }

    let mut eye = Vec::with_capacity(samples.len());
    let mut last = samples[0];
    for s in samples {
        if s.valid {
            last = *s;
        }
        eye.push(last);
    }

    let n_valid = samples.iter().filter(|s| s.valid).count() as f64;
    let mut fix_mean = [0.0; 3];
    for s in samples.iter().filter(|s| s.valid) {
        for k in 0..3 {
            fix_mean[k] += s.fix3d[k];
        }
    }
    fix_mean.iter_mut().for_each(|m| *m /= n_valid);
    let centered_fix: Vec<[f64; 3]> = eye
        .iter()
        .map(|s| {
            [
                s.fix3d[0] - fix_mean[0],
                s.fix3d[1] - fix_mean[1],
                s.fix3d[2] - fix_mean[2],
            ]
        })
        .collect();
    let fix_heading = heading_of(centered_fix[0][0], centered_fix[0][2]);

    let n = samples.len() as f64;
    let mut trans_mean = [0.0; 3];
    for s in samples {
        for k in 0..3 {
            trans_mean[k] += s.trans[k];
        }
    }
    trans_mean.iter_mut().for_each(|m| *m /= n);
    let t0 = samples[0].trans;
    let trans_heading = samples
        .iter()
        .skip(1)
        .find_map(|s| heading_of(s.trans[0] - t0[0], s.trans[2] - t0[2]));

    let q0 = samples[0].rot.normalized();
    let fwd0 = q0.rotate([0.0, 0.0, 1.0]);
    let yaw0 = match heading_of(fwd0[0], fwd0[2]) {
        Some((x, z)) => Quat::yaw(x.atan2(z)),
        None => Quat::IDENTITY,
    };
    let yaw0_inv = yaw0.conj();
    let anchor = yaw0_inv.mul(q0).normalized();
    let anchor_inv = anchor.conj();

    let rows = samples
        .iter()
        .zip(&eye)
        .zip(&centered_fix)
        .enumerate()
        .map(|(i, ((raw, e), c))| {
            let mut row = [0.0; FEATURE_WIDTH];
            let fix = to_body(*c, fix_heading);
            row[col::FIX3D..col::FIX3D + 3].copy_from_slice(&fix);
            row[col::DIR3D..col::DIR3D + 3].copy_from_slice(&e.dir3d);
            row[col::G2D] = e.g2d[0].clamp(0.0, 1.0);
            row[col::G2D + 1] = e.g2d[1].clamp(0.0, 1.0);
            row[col::DEPTH] = e.depth_m;
            let rel = if i == 0 {
                Quat::IDENTITY
            } else {
                let aligned = yaw0_inv.mul(raw.rot.normalized());
                quat_to_body(aligned.mul(anchor_inv).normalized().canonical())
            };
            row[col::REL_ROT..col::REL_ROT + 4].copy_from_slice(&rel.to_array());
            let ct = [
                raw.trans[0] - trans_mean[0],
                raw.trans[1] - trans_mean[1],
                raw.trans[2] - trans_mean[2],
            ];
            row[col::TRANS..col::TRANS + 3].copy_from_slice(&to_body(ct, trans_heading));
            row[col::VALID] = if raw.valid { 1.0 } else { 0.0 };
            row
        })
        .collect();

    Ok(NormalizedGaze {
        rows,
        anchor_rot: quat_to_body(anchor.canonical()),
    })
}
