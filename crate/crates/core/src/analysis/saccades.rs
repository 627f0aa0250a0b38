use serde::{Deserialize, Serialize};

use super::fixations::{angle_between_deg, FixationEvent};
use super::stats::Summary;
use crate::gaze::GazeSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saccade {
    pub start_s: f64,
    pub end_s: f64,
    pub amplitude_deg: f64,
    pub peak_speed_deg_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaccadeStats {
    pub count: usize,
    pub amplitude_deg: Summary,
    pub peak_speed_deg_s: Summary,
    pub saccades: Vec<Saccade>,
}

/// Angular speed (deg/s) per sample: central differences of `dir3d`
/// (one-sided at the ends), then a centered 3-sample moving average.
pub fn angular_speed(seq: &GazeSequence) -> Vec<f64> {
    let s = seq.samples();
    let n = s.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            angle_between_deg(s[a].dir3d, s[b].dir3d) / (s[b].time_s - s[a].time_s)
        })
        .collect();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            raw[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect()
}

/// One saccade per pair of consecutive fixations: amplitude is the angle
/// between the fixation centroids, peak speed the maximum smoothed angular
/// speed from the end of one fixation to the start of the next.
pub fn saccade_stats(seq: &GazeSequence, fixations: &[FixationEvent]) -> SaccadeStats {
    if fixations.len() < 2 {
        return SaccadeStats {
            count: 0,
            amplitude_deg: Summary::of(&[]),
            peak_speed_deg_s: Summary::of(&[]),
            saccades: Vec::new(),
        };
    }
    let speed = angular_speed(seq);
    let saccades: Vec<Saccade> = fixations
        .windows(2)
        .map(|w| {
            let peak = speed[w[0].last..=w[1].first].iter().copied().fold(0.0, f64::max);
            Saccade {
                start_s: w[0].end_s,
                end_s: w[1].start_s,
                amplitude_deg: angle_between_deg(w[0].centroid_dir, w[1].centroid_dir),
                peak_speed_deg_s: peak,
            }
        })
        .collect();
    let amps: Vec<f64> = saccades.iter().map(|s| s.amplitude_deg).collect();
    let peaks: Vec<f64> = saccades.iter().map(|s| s.peak_speed_deg_s).collect();
    SaccadeStats {
        count: saccades.len(),
        amplitude_deg: Summary::of(&amps),
        peak_speed_deg_s: Summary::of(&peaks),
        saccades,
    }
}
