use log::warn;

use super::types::{Clip, Recording};
use super::{CLIP_DURATION_S, CLIP_FPS, CLIP_FRAMES};
use crate::error::Result;

/// Gaze/frame skew above which alignment is reported.
const MAX_SKEW_S: f64 = 0.25;

pub const DEFAULT_CLIPS: usize = 10;

/// Start times of `n_clips` clips equally spaced over `[start, end - duration]`.
pub fn clip_starts(start: f64, end: f64, n_clips: usize) -> Vec<f64> {
    let room = (end - start - CLIP_DURATION_S).max(0.0);
    if n_clips <= 1 {
        return vec![start];
    }
    (0..n_clips)
        .map(|k| start + room * k as f64 / (n_clips - 1) as f64)
        .collect()
}

/// Splits a recording into `n_clips` equally spaced 16-frame clips at 2 FPS.
///
/// A recording shorter than one clip yields a single clip, flagged `padded`,
/// whose tail repeats the last in-span timestamp.
pub fn segment_clips(rec: &Recording, n_clips: usize) -> Result<Vec<Clip>> {
    segment(rec, n_clips, true)
}

/// [`segment_clips`] without touching the frame source; `frames` is `None`.
pub fn segment_gaze_clips(rec: &Recording, n_clips: usize) -> Result<Vec<Clip>> {
    segment(rec, n_clips, false)
}

fn segment(rec: &Recording, n_clips: usize, with_frames: bool) -> Result<Vec<Clip>> {
    let (start, end) = rec.span();
    let step = 1.0 / CLIP_FPS;
    if end - start < CLIP_DURATION_S - 1e-9 {
        let in_span = ((end - start) / step + 1e-9).floor() as usize + 1;
        let times: Vec<f64> = (0..CLIP_FRAMES)
            .map(|k| start + step * k.min(in_span - 1) as f64)
            .collect();
        return Ok(vec![build_clip(rec, 0, times, true, with_frames)?]);
    }
    clip_starts(start, end, n_clips)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let times = (0..CLIP_FRAMES).map(|k| (s + step * k as f64).min(end)).collect();
            build_clip(rec, i, times, false, with_frames)
        })
        .collect()
}

fn build_clip(rec: &Recording, index: usize, frame_times: Vec<f64>, padded: bool, with_frames: bool) -> Result<Clip> {
    let samples = rec.gaze.samples();
    let gaze = frame_times
        .iter()
        .map(|&t| {
            let s = samples[rec.gaze.nearest_index(t)];
            if (s.time_s - t).abs() > MAX_SKEW_S {
                warn!(
                    "recording {}: gaze sample {:.3}s is {:.3}s from frame time {:.3}s",
                    rec.id(),
                    s.time_s,
                    (s.time_s - t).abs(),
                    t
                );
            }
            s
        })
        .collect();
    let frames = match &rec.frames {
        Some(src) if with_frames => Some(
            frame_times
                .iter()
                .map(|&t| src.frame(src.nearest_index(t)))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    Ok(Clip {
        recording_id: rec.id().to_string(),
        index,
        frame_times,
        frames,
        gaze,
        padded,
    })
}
