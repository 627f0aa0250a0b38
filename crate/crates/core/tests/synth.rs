use std::fs;

use skillsight::analysis::detect_fixations;
use skillsight::gaze::{load_dataset, Split};
use skillsight::synth::{
    direction, generate_dataset, generate_recordings, planted_event_trace, EventScript, PlantedFixation, SynthTaskSpec,
    TaskKind,
};

#[test]
fn same_seed_gives_identical_files() {
    let spec = {
        let mut s = SynthTaskSpec::new(TaskKind::Distillation, 3, 21);
        s.frames = false;
        s
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_dataset(&spec, &spec.default_profiles(), a.path()).unwrap();
    generate_dataset(&spec, &spec.default_profiles(), b.path()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let (pa, pb) = (
            a.path().join(&n).join("gaze.jsonl"),
            b.path().join(&n).join("gaze.jsonl"),
        );
        if pa.exists() {
            assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
        }
    }
}

#[test]
fn dataset_loads_with_generator_labels() {
    let spec = SynthTaskSpec::new(TaskKind::VisuallySeparable, 5, 2);
    let dir = tempfile::tempdir().unwrap();
    let generated = generate_dataset(&spec, &spec.default_profiles(), dir.path()).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.len(), generated.len());
    for g in &generated {
        let l = loaded.iter().find(|r| r.id() == g.recording.id()).unwrap();
        assert_eq!(l.meta.skill, g.recording.meta.skill);
        assert_eq!(l.meta.scenario, spec.scenario);
        assert_eq!(l.meta.subtask, g.recording.meta.subtask);
        assert!(l.frames.is_some());
    }
    let count = |s| loaded.iter().filter(|r| r.meta.split == s).count();
    assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (6, 2, 2));
}

#[test]
fn label_noise_only_touches_training_labels() {
    let mut spec = SynthTaskSpec::new(TaskKind::Distillation, 40, 5);
    spec.frames = false;
    spec.label_noise = 0.3;
    let recs = generate_recordings(&spec, &spec.default_profiles()).unwrap();
    let flipped = |split| {
        recs.iter()
            .filter(|r| r.recording.meta.split == split && r.recording.meta.skill != r.true_class)
            .count()
    };
    assert_eq!(flipped(Split::Val) + flipped(Split::Test), 0);
    let train = recs.iter().filter(|r| r.recording.meta.split == Split::Train).count() as f64;
    let rate = flipped(Split::Train) as f64 / train;
    assert!((0.15..0.45).contains(&rate), "{rate}");
}

#[test]
fn class_depth_means_match_profiles() {
    let mut spec = SynthTaskSpec::new(TaskKind::GazeSeparable, 50, 8);
    spec.frames = false;
    let mut profiles = skillsight::synth::shared_profiles(2);
    profiles[0].depth_m.mean = 1.4;
    profiles[1].depth_m.mean = 1.1;
    let recs = generate_recordings(&spec, &profiles).unwrap();
    for (class, want) in [(0, 1.4), (1, 1.1)] {
        let depths: Vec<f64> = recs
            .iter()
            .filter(|r| r.true_class == class)
            .flat_map(|r| r.recording.gaze.samples().iter().filter(|s| s.valid).map(|s| s.depth_m))
            .collect();
        let mean = depths.iter().sum::<f64>() / depths.len() as f64;
        assert!((mean - want).abs() <= 0.05, "class {class}: {mean}");
    }
}

#[test]
fn scripted_trace_without_noise() {
    let script = EventScript {
        fixations: vec![
            PlantedFixation {
                start_s: 0.0,
                end_s: 0.6,
                az_deg: -8.0,
                el_deg: 2.0,
                depth_m: 0.8,
            },
            PlantedFixation {
                start_s: 0.8,
                end_s: 1.4,
                az_deg: 6.0,
                el_deg: -4.0,
                depth_m: 2.0,
            },
            PlantedFixation {
                start_s: 1.6,
                end_s: 2.2,
                az_deg: 0.0,
                el_deg: 10.0,
                depth_m: 3.0,
            },
        ],
        duration_s: 2.2,
        rate_hz: 50.0,
        noise_deg: 0.0,
        seed: 0,
    };
    let seq = planted_event_trace(&script).unwrap();
    for s in seq.samples() {
        let (az, el, depth) = script.at(s.time_s);
        let d = direction(az, el);
        for a in 0..3 {
            assert!((s.dir3d[a] - d[a]).abs() < 1e-12);
        }
        assert!((s.depth_m - depth).abs() < 1e-12);
    }
    let ev = detect_fixations(&seq, 1.0, 0.1);
    assert_eq!(ev.len(), 3);
    for (e, f) in ev.iter().zip(&script.fixations) {
        assert!(
            (e.start_s - f.start_s).abs() < 1e-9 && (e.end_s - f.end_s).abs() < 1e-9,
            "{e:?} vs {f:?}"
        );
    }

    let empty = EventScript {
        fixations: vec![],
        ..script
    };
    let seq = planted_event_trace(&empty).unwrap();
    let first = seq.samples()[0];
    assert!(seq
        .samples()
        .iter()
        .all(|s| s.dir3d == first.dir3d && s.depth_m == first.depth_m));
}
