//! Recording directory format.
//!
//! ```text
//! <recording>/
//!   meta.json            {id, scenario, subtask, skill, split, k_classes, up_axis, frame_rate_hz}
//!   gaze.jsonl           {t, fix3d, dir3d, g2d, depth, quat, trans, valid} per line
//!   frames/index.json    {"<frame index>": <timestamp>, ...}   (optional)
//!   frames/frame_%06d.png
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::quat::Quat;
use super::types::{FrameSource, FrameStorage, GazeSample, GazeSequence, Recording, RecordingMeta};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GazeRow {
    t: f64,
    fix3d: [f64; 3],
    dir3d: [f64; 3],
    g2d: [f64; 2],
    depth: f64,
    quat: [f64; 4],
    trans: [f64; 3],
    valid: bool,
}

impl From<&GazeSample> for GazeRow {
    fn from(s: &GazeSample) -> Self {
        Self {
            t: s.time_s,
            fix3d: s.fix3d,
            dir3d: s.dir3d,
            g2d: s.g2d,
            depth: s.depth_m,
            quat: s.rot.to_array(),
            trans: s.trans,
            valid: s.valid,
        }
    }
}

impl From<GazeRow> for GazeSample {
    fn from(r: GazeRow) -> Self {
        Self {
            time_s: r.t,
            fix3d: r.fix3d,
            dir3d: r.dir3d,
            g2d: r.g2d,
            depth_m: r.depth,
            rot: Quat::from_array(r.quat),
            trans: r.trans,
            valid: r.valid,
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    fs::write(path, text).map_err(Error::io(path))
}

pub fn load_recording(dir: impl AsRef<Path>) -> Result<Recording> {
    let dir = dir.as_ref();
    let meta: RecordingMeta = read_json(&dir.join("meta.json"))?;
    if meta.up_axis != "y" {
        return Err(Error::format(
            "meta.json up_axis",
            format!("expected \"y\", got {:?}", meta.up_axis),
        ));
    }
    if meta.k_classes == 0 || meta.skill >= meta.k_classes {
        return Err(Error::format(
            "meta.json skill",
            format!("skill {} outside [0, {})", meta.skill, meta.k_classes),
        ));
    }

    let gaze_path = dir.join("gaze.jsonl");
    let file = fs::File::open(&gaze_path).map_err(Error::io(&gaze_path))?;
    let mut samples = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(&gaze_path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: GazeRow = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("gaze.jsonl line {}", lineno + 1), e.to_string()))?;
        let sample = GazeSample::from(row);
        if let Err((field, why)) = sample.check() {
            return Err(Error::format(
                format!("gaze.jsonl line {} field {field}", lineno + 1),
                why,
            ));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no samples", gaze_path.display())));
    }
    let rate = meta.gaze_rate_hz.unwrap_or_else(|| estimate_rate(&samples));
    let gaze = GazeSequence::new(samples, rate)?;

    let frames_dir = dir.join("frames");
    let frames = if frames_dir.is_dir() {
        let index: BTreeMap<usize, f64> = read_json(&frames_dir.join("index.json"))?;
        let times = dense_times(&index)?;
        check_span(&times, &gaze, meta.frame_rate_hz)?;
        Some(FrameSource {
            times,
            storage: FrameStorage::Dir(frames_dir),
        })
    } else {
        None
    };
    Ok(Recording { meta, frames, gaze })
}

fn estimate_rate(samples: &[GazeSample]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let span = samples[samples.len() - 1].time_s - samples[0].time_s;
    (samples.len() - 1) as f64 / span
}

fn dense_times(index: &BTreeMap<usize, f64>) -> Result<Vec<f64>> {
    let mut times = Vec::with_capacity(index.len());
    for (expected, (&i, &t)) in index.iter().enumerate() {
        if i != expected {
            return Err(Error::format(
                "frames/index.json",
                format!("missing frame index {expected}"),
            ));
        }
        if times.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::format(
                "frames/index.json",
                format!("timestamp of frame {i} not increasing"),
            ));
        }
        times.push(t);
    }
    if times.is_empty() {
        return Err(Error::EmptyInput("frames/index.json lists no frames".into()));
    }
    Ok(times)
}

fn check_span(times: &[f64], gaze: &GazeSequence, frame_rate_hz: f64) -> Result<()> {
    let slack = if frame_rate_hz > 0.0 { 1.0 / frame_rate_hz } else { 0.0 };
    let (lo, hi) = (times[0] - slack, times[times.len() - 1] + slack);
    if gaze.start_s() < lo || gaze.end_s() > hi {
        return Err(Error::format(
            "gaze.jsonl t",
            format!(
                "gaze span [{}, {}] outside frame span [{}, {}]",
                gaze.start_s(),
                gaze.end_s(),
                times[0],
                times[times.len() - 1]
            ),
        ));
    }
    Ok(())
}

/// Writes `rec` in the directory format; in-memory frames are encoded as PNG,
/// directory-backed frames are copied.
pub fn save_recording(rec: &Recording, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_json(&dir.join("meta.json"), &rec.meta)?;

    let gaze_path = dir.join("gaze.jsonl");
    let file = fs::File::create(&gaze_path).map_err(Error::io(&gaze_path))?;
    let mut out = BufWriter::new(file);
    for s in rec.gaze.samples() {
        let line = serde_json::to_string(&GazeRow::from(s)).map_err(Error::json(&gaze_path))?;
        writeln!(out, "{line}").map_err(Error::io(&gaze_path))?;
    }
    out.flush().map_err(Error::io(&gaze_path))?;

    if let Some(frames) = &rec.frames {
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir).map_err(Error::io(&frames_dir))?;
        let index: BTreeMap<usize, f64> = frames.times.iter().copied().enumerate().collect();
        write_json(&frames_dir.join("index.json"), &index)?;
        for i in 0..frames.len() {
            let path = frames_dir.join(format!("frame_{i:06}.png"));
            match &frames.storage {
                FrameStorage::Dir(src) if src == &frames_dir => {}
                FrameStorage::Dir(src) => {
                    let from = src.join(format!("frame_{i:06}.png"));
                    fs::copy(&from, &path).map_err(Error::io(&from))?;
                }
                FrameStorage::Memory(_) => {
                    frames.frame(i)?.save(&path).map_err(|source| Error::Image {
                        path: path.clone(),
                        source,
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// Loads every recording directory (one containing `meta.json`) directly
/// under `root`, ordered by directory name.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<Recording>> {
    let root = root.as_ref();
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(Error::io(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::EmptyInput(format!("no recordings under {}", root.display())));
    }
    dirs.iter().map(load_recording).collect()
}
