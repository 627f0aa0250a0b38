use std::fs;

use skillsight::gaze::{
    clip_starts, col, load_recording, normalize_samples, save_recording, segment_clips, segment_gaze_clips, GazeSample,
    GazeSequence, Quat, Recording, RecordingMeta, Split,
};
use skillsight::synth::{default_rois, generate_recording, sample_at, SynthTaskSpec, TaskKind};
use skillsight::Error;

fn recording(duration_s: f64, rate_hz: f64) -> Recording {
    let n = (duration_s * rate_hz).round() as usize + 1;
    let samples = (0..n).map(|i| GazeSample::straight_ahead(i as f64 / rate_hz)).collect();
    Recording {
        meta: RecordingMeta {
            id: "r".into(),
            scenario: "s".into(),
            subtask: "t".into(),
            skill: 0,
            split: Split::Train,
            k_classes: 2,
            up_axis: "y".into(),
            frame_rate_hz: 2.0,
            gaze_rate_hz: Some(rate_hz),
        },
        frames: None,
        gaze: GazeSequence::new(samples, rate_hz).unwrap(),
    }
}

#[test]
fn ten_clips_over_five_minutes() {
    let starts = clip_starts(0.0, 300.0, 10);
    let want: Vec<f64> = (0..10).map(|k| 32.5 * k as f64).collect();
    for (s, w) in starts.iter().zip(&want) {
        assert!((s - w).abs() < 1e-9, "{starts:?}");
    }
    let clips = segment_gaze_clips(&recording(300.0, 4.0), 10).unwrap();
    assert_eq!(clips.len(), 10);
    assert!((clips[9].frame_times[0] - 292.5).abs() < 1e-9);
    assert!(clips.iter().all(|c| c.frame_times.len() == 16 && !c.padded));
}

#[test]
fn one_clip_long_recording_repeats_the_same_clip() {
    let clips = segment_gaze_clips(&recording(7.5, 30.0), 10).unwrap();
    assert_eq!(clips.len(), 10);
    assert!(clips.iter().all(|c| c.frame_times == clips[0].frame_times));
}

#[test]
fn short_recording_gives_one_padded_clip() {
    let clips = segment_gaze_clips(&recording(5.0, 30.0), 10).unwrap();
    assert_eq!(clips.len(), 1);
    let c = &clips[0];
    assert!(c.padded);
    let last = c.frame_times[10];
    assert_eq!(last, 5.0);
    assert_eq!(c.frame_times[11..].iter().filter(|&&t| t == last).count(), 5);
}

#[test]
fn saved_recording_round_trips() {
    let spec = SynthTaskSpec::new(TaskKind::VisuallySeparable, 2, 3);
    let profiles = spec.default_profiles();
    let rec = generate_recording(&spec, &profiles, &default_rois(), 1, 4)
        .unwrap()
        .recording;
    let dir = tempfile::tempdir().unwrap();
    save_recording(&rec, dir.path()).unwrap();
    let back = load_recording(dir.path()).unwrap();
    assert_eq!(back.meta, rec.meta);
    assert_eq!(back.gaze.samples(), rec.gaze.samples());
    assert_eq!(back.meta.skill, 1);
    assert_eq!(back.meta.split, Split::Test);
    let a = segment_clips(&rec, 2).unwrap();
    let b = segment_clips(&back, 2).unwrap();
    assert_eq!(a[1].frames, b[1].frames, "PNG frames are lossless");
}

#[test]
fn non_unit_direction_is_a_format_error() {
    let rec = recording(1.0, 10.0);
    let dir = tempfile::tempdir().unwrap();
    save_recording(&rec, dir.path()).unwrap();
    let path = dir.path().join("gaze.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut row: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    row["dir3d"] = serde_json::json!([0.0, 0.0, 0.5]);
    lines[3] = row.to_string();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match load_recording(dir.path()) {
        Err(e @ Error::Format { .. }) => assert!(e.to_string().contains("dir3d not unit"), "{e}"),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn constant_sequence_normalizes_to_zero_motion() {
    let s = sample_at(0.0, [0.5, 0.5], 2.0, Quat::yaw(0.3), [1.0, 1.5, -2.0]);
    let samples: Vec<GazeSample> = (0..20)
        .map(|i| GazeSample {
            time_s: i as f64 / 30.0,
            ..s
        })
        .collect();
    let out = normalize_samples(&samples).unwrap();
    for row in &out.rows {
        assert_eq!(row[col::REL_ROT..col::REL_ROT + 4], [1.0, 0.0, 0.0, 0.0]);
        for c in col::TRANS..col::TRANS + 3 {
            assert!(row[c].abs() < 1e-12);
        }
        assert_eq!(row[col::VALID], 1.0);
    }
}

#[test]
fn quarter_turn_and_shift_leave_features_unchanged() {
    let samples: Vec<GazeSample> = (0..40)
        .map(|i| {
            let t = i as f64 / 30.0;
            let rot = Quat::from_axis_angle([0.2, 1.0, 0.1], 0.4 * t).mul(Quat::from_axis_angle([1.0, 0.0, 0.0], 0.2));
            sample_at(
                t,
                [0.3 + 0.01 * i as f64, 0.6],
                1.0 + 0.05 * i as f64,
                rot.normalized(),
                [0.1 * t, 1.6, 0.0],
            )
        })
        .collect();
    let yaw = Quat::yaw(std::f64::consts::FRAC_PI_2);
    let moved: Vec<GazeSample> = samples
        .iter()
        .map(|s| {
            let f = yaw.rotate(s.fix3d);
            let t = yaw.rotate(s.trans);
            GazeSample {
                fix3d: [f[0] + 5.0, f[1], f[2] + 2.0],
                trans: [t[0] + 5.0, t[1], t[2] + 2.0],
                rot: yaw.mul(s.rot),
                ..*s
            }
        })
        .collect();
    let a = normalize_samples(&samples).unwrap();
    let b = normalize_samples(&moved).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() <= 1e-6, "{ra:?} vs {rb:?}");
        }
    }
}

#[test]
fn non_unit_quaternion_is_rejected() {
    let mut s = GazeSample::straight_ahead(0.0);
    s.rot = Quat::new(2.0, 0.0, 0.0, 0.0);
    assert!(GazeSequence::new(vec![s], 30.0).is_err());
}
