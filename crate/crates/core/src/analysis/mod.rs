//! Eye-movement event detection and per-group gaze statistics.

mod fixations;
mod plot;
mod report;
mod saccades;
mod stats;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub use fixations::{
    angle_between_deg, detect_fixations, detect_fixations_with, direction_angles, FixationEvent, FixationKind,
    FixationParams,
};
pub use plot::histogram_png;
pub use report::{group_report, sequence_stats, transition_key, GazeStatsReport, GroupStats, Roi, RoiSpec};
pub use saccades::{angular_speed, saccade_stats, Saccade, SaccadeStats};
pub use stats::{quantile, Summary};

use crate::error::{Error, Result};
use crate::gaze::GazeSequence;

/// Writes `report.json` and one histogram PNG per metric into `out`.
pub fn write_report(
    out: &Path,
    sequences: &[&GazeSequence],
    labels: &[usize],
    roi: &RoiSpec,
    params: &FixationParams,
) -> Result<GazeStatsReport> {
    let report = group_report(sequences, labels, roi, params)?;
    fs::create_dir_all(out).map_err(Error::io(out))?;
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(Error::json(&path))?;
    fs::write(&path, text).map_err(Error::io(&path))?;

    let mut depth: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut duration: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut amplitude: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (seq, &label) in sequences.iter().zip(labels) {
        let fix = detect_fixations_with(seq, params);
        let sacc = saccade_stats(seq, &fix);
        depth
            .entry(label)
            .or_default()
            .extend(seq.samples().iter().filter(|s| s.valid).map(|s| s.depth_m));
        duration
            .entry(label)
            .or_default()
            .extend(fix.iter().map(|f| f.duration_s()));
        amplitude
            .entry(label)
            .or_default()
            .extend(sacc.saccades.iter().map(|s| s.amplitude_deg));
    }
    histogram_png(&out.join("hist_gaze_depth.png"), &depth, 24)?;
    histogram_png(&out.join("hist_fixation_duration.png"), &duration, 24)?;
    histogram_png(&out.join("hist_saccade_amplitude.png"), &amplitude, 24)?;
    Ok(report)
}
