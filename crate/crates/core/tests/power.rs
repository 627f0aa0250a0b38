mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skillsight::power::profiles::full_scale_student;
use skillsight::power::{
    count_macs, estimate_bytes, power_mw, power_report, Architecture, Layer, ModelEntry, PowerConstants, PowerProfile,
    Sensor,
};

use common::{macs_oracle, random_layer};

fn linear(tokens: u64, d_in: u64, d_out: u64) -> Layer {
    Layer::Linear {
        tokens,
        d_in,
        d_out,
        bias: true,
    }
}

#[test]
fn single_linear_macs_and_bytes() {
    let arch = Architecture::new("l", vec![linear(16, 14, 128)]);
    assert_eq!(count_macs(&arch), 28_672);
    assert_eq!(estimate_bytes(&arch), 4 * (16 * 14 + 16 * 128 + 14 * 128 + 128));
    let empty = Architecture::empty("e");
    assert_eq!((count_macs(&empty), estimate_bytes(&empty)), (0, 0));
}

#[test]
fn transformer_matches_summation_oracle() {
    let block = Layer::TransformerBlock {
        tokens: 19,
        hidden: 768,
        heads: 12,
        ffn_hidden: 3072,
    };
    let arch = Architecture::new("t", vec![block.clone(); 4]);
    assert_eq!(count_macs(&arch), 4 * macs_oracle(&block));
    // 19 tokens: qkv 19*768*2304, scores and weighting 2*19*19*768, proj 19*768*768, ffn 2*19*768*3072
    let per_block = 19 * 768 * 2304 + 2 * 19 * 19 * 768 + 19 * 768 * 768 + 2 * 19 * 768 * 3072;
    assert_eq!(count_macs(&arch), 4 * per_block);
}

#[test]
fn counts_add_over_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let a = Architecture::new("a", (0..3).map(|_| random_layer(&mut rng)).collect());
        let b = Architecture::new("b", (0..3).map(|_| random_layer(&mut rng)).collect());
        let ab = a.clone().then(b.clone());
        assert_eq!(count_macs(&ab), count_macs(&a) + count_macs(&b));
        assert_eq!(estimate_bytes(&ab), estimate_bytes(&a) + estimate_bytes(&b));
    }
}

#[test]
fn unit_conversions() {
    let c = PowerConstants::default();
    let eye = PowerProfile::sensors_only(&[(Sensor::Eye, 1.0)]);
    assert_eq!(power_mw(&eye, &c).unwrap().total_mw, 7.8);
    let compute = PowerProfile {
        macs: 1_000_000_000,
        bytes: 0,
        interval_s: 1.0,
        sensors: Default::default(),
    };
    assert!((power_mw(&compute, &c).unwrap().total_mw - 4.6).abs() < 1e-12);
    // 1 pJ per second is 1e-9 mW
    let one = PowerConstants {
        alpha_pj_per_mac: 1.0,
        ..c.clone()
    };
    let p = PowerProfile {
        macs: 1,
        ..compute.clone()
    };
    assert!((power_mw(&p, &one).unwrap().compute_mw - 1e-9).abs() < 1e-24);
}

#[test]
fn full_scale_student_brackets_reported_power() {
    let p = PowerProfile::from_arch(&full_scale_student(17, 2), 8.0, &[Sensor::Eye]);
    let mw = power_mw(&p, &PowerConstants::default()).unwrap().total_mw;
    assert!((8.5..=10.5).contains(&mw), "{mw}");
}

#[test]
fn invalid_profiles_are_rejected() {
    let c = PowerConstants::default();
    let mut p = PowerProfile::sensors_only(&[(Sensor::Eye, 1.5)]);
    assert!(power_mw(&p, &c).is_err());
    p.sensors.clear();
    p.interval_s = 0.0;
    assert!(power_mw(&p, &c).is_err());
}

#[test]
fn report_of_one_model_has_no_ratios() {
    let entry = ModelEntry {
        name: "student".into(),
        profile: PowerProfile::sensors_only(&[(Sensor::Eye, 1.0)]),
        accuracy: Some(0.5),
    };
    let r = power_report(&[entry.clone()], &PowerConstants::default()).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.ratios.values().all(|m| m.is_empty()));

    let video = ModelEntry {
        name: "video".into(),
        profile: PowerProfile::sensors_only(&[(Sensor::Rgb, 1.0)]),
        accuracy: None,
    };
    let r = power_report(&[video, entry], &PowerConstants::default()).unwrap();
    assert!((r.ratio("video", "student").unwrap() - 35.0 / 7.8).abs() < 1e-12);
    assert!(r.to_csv().lines().count() == 3);
}

#[test]
fn unknown_layer_kind_is_named() {
    let err = Architecture::from_json(r#"{"name": "x", "layers": [{"kind": "lstm", "hidden": 4}]}"#).unwrap_err();
    assert!(err.to_string().contains("lstm"), "{err}");
}
