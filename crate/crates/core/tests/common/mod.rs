//! Shared configs and independent oracles for the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;

use skillsight::analysis::direction_angles;
use skillsight::gaze::{GazeSequence, Recording};
use skillsight::power::Layer;
use skillsight::student::StudentConfig;
use skillsight::synth::{generate_recordings, SynthTaskSpec, TaskKind};
use skillsight::teacher::{EncoderConfig, TeacherConfig};

pub fn encoder(layers: usize, heads: usize, width: usize) -> EncoderConfig {
    EncoderConfig {
        layers,
        heads,
        width,
        ffn_hidden: 2 * width,
    }
}

/// Smallest teacher that still exercises every branch.
pub fn tiny_teacher(scenarios: &[&str]) -> TeacherConfig {
    let mut c = TeacherConfig::default();
    c.attention.scenarios = scenarios.iter().map(|s| s.to_string()).collect();
    c.video = encoder(1, 2, 8);
    c.crop.temporal = encoder(1, 2, 8);
    c.gaze = encoder(1, 2, 8);
    c.fusion_hidden = [8, 6];
    c.train.clips_per_recording = 1;
    c
}

/// Reduced teacher used for the end-to-end checks on one CPU core.
pub fn desk_teacher() -> TeacherConfig {
    let mut c = TeacherConfig::default();
    c.attention.scenarios = vec!["synth".into()];
    c.video = encoder(2, 4, 64);
    c.crop.temporal = encoder(2, 4, 64);
    c.gaze = encoder(2, 4, 64);
    c.fusion_hidden = [128, 64];
    c.train.clips_per_recording = 2;
    c
}

pub fn tiny_student() -> StudentConfig {
    let mut c = StudentConfig::default();
    c.encoder = encoder(1, 2, 8);
    c.train.epochs = 1;
    c.train.clips_per_recording = 1;
    c
}

pub fn recordings(kind: TaskKind, n_per_class: usize, seed: u64, frames: bool) -> Vec<Recording> {
    let mut spec = SynthTaskSpec::new(kind, n_per_class, seed);
    spec.frames = frames;
    generate_recordings(&spec, &spec.default_profiles())
        .unwrap()
        .into_iter()
        .map(|r| r.recording)
        .collect()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Plain row softmax: subtract the max, exponentiate, divide by the sum.
pub fn softmax_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps entries whose true
/// gradient is numerically zero from dividing rounding noise by itself.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `loss` in one parameter entry of a model copy.
pub fn central_difference<M: Clone>(
    model: &M,
    entry: impl Fn(&mut M) -> &mut f64,
    loss: impl Fn(&M) -> f64,
    eps: f64,
) -> f64 {
    let mut plus = model.clone();
    *entry(&mut plus) += eps;
    let mut minus = model.clone();
    *entry(&mut minus) -= eps;
    (loss(&plus) - loss(&minus)) / (2.0 * eps)
}

/// Exhaustive window-growing fixation oracle. From each start it looks at
/// every candidate end, recomputing the dispersion from scratch each time.
/// Returns `(first, last)` sample indices.
pub fn idt_oracle(seq: &GazeSequence, dispersion_deg: f64, min_s: f64) -> Vec<(usize, usize)> {
    let s = seq.samples();
    let n = s.len();
    let dispersion = |a: usize, b: usize| {
        let ang: Vec<(f64, f64)> = (a..=b).map(|k| direction_angles(s[k].dir3d)).collect();
        let range = |f: &dyn Fn(&(f64, f64)) -> f64| {
            let lo = ang.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = ang.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        range(&|p| p.0) + range(&|p| p.1)
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !s[i].valid {
            i += 1;
            continue;
        }
        // last sample of the valid run starting at i
        let mut run_end = i;
        while run_end + 1 < n && s[run_end + 1].valid {
            run_end += 1;
        }
        let shortest = (i..=run_end).find(|&j| s[j].time_s - s[i].time_s >= min_s - 1e-9);
        let Some(j0) = shortest else {
            i += 1;
            continue;
        };
        if dispersion(i, j0) > dispersion_deg {
            i += 1;
            continue;
        }
        let mut last = j0;
        for j in j0 + 1..=run_end {
            if dispersion(i, j) > dispersion_deg {
                break;
            }
            last = j;
        }
        out.push((i, last));
        i = last + 1;
    }
    out
}

/// MACs of one dense product `[m, k] x [k, n]`.
fn matmul(m: u64, k: u64, n: u64) -> u64 {
    m * k * n
}

/// Output positions of a 1D sliding window, counted one by one.
fn positions(input: u64, kernel: u64, stride: u64, pad: u64) -> u64 {
    let mut count = 0;
    let mut start = 0;
    while start + kernel <= input + 2 * pad {
        count += 1;
        start += stride;
    }
    count
}

/// Per-layer MAC oracle written from the definitions: every layer is broken
/// into dense products (per head for attention) and convolutions are
/// counted window by window.
pub fn macs_oracle(layer: &Layer) -> u64 {
    match layer {
        Layer::Linear {
            tokens, d_in, d_out, ..
        } => matmul(*tokens, *d_in, *d_out),
        Layer::Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            in_hw,
            padding,
            frames,
        } => {
            let oh = positions(in_hw[0], kernel[0], stride[0], padding[0]);
            let ow = positions(in_hw[1], kernel[1], stride[1], padding[1]);
            let mut total = 0;
            for _ in 0..*frames {
                for _ in 0..oh * ow {
                    total += out_ch * in_ch * kernel[0] * kernel[1];
                }
            }
            total
        }
        Layer::Attention {
            groups,
            seq_len,
            hidden,
            heads,
        } => attention_oracle(*groups, *seq_len, *hidden, *heads),
        Layer::Mlp { tokens, dims } => dims.windows(2).map(|w| matmul(*tokens, w[0], w[1])).sum(),
        Layer::TransformerBlock {
            tokens,
            hidden,
            heads,
            ffn_hidden,
        } => {
            attention_oracle(1, *tokens, *hidden, *heads)
                + matmul(*tokens, *hidden, *ffn_hidden)
                + matmul(*tokens, *ffn_hidden, *hidden)
        }
        Layer::Norm { .. } | Layer::Elementwise { .. } => 0,
    }
}

fn attention_oracle(groups: u64, seq: u64, hidden: u64, heads: u64) -> u64 {
    let dh = hidden / heads;
    let tokens = groups * seq;
    let mut total = matmul(tokens, hidden, 3 * hidden);
    for _ in 0..groups {
        for _ in 0..heads {
            total += matmul(seq, dh, seq); // q k^T
            total += matmul(seq, seq, dh); // weights v
        }
    }
    total + matmul(tokens, hidden, hidden)
}

pub fn random_layer<R: Rng>(rng: &mut R) -> Layer {
    let heads = rng.gen_range(1..=4u64);
    let hidden = heads * rng.gen_range(1..=16u64);
    match rng.gen_range(0..7) {
        0 => Layer::Linear {
            tokens: rng.gen_range(1..40),
            d_in: rng.gen_range(1..200),
            d_out: rng.gen_range(1..200),
            bias: rng.gen(),
        },
        1 => {
            let k = [rng.gen_range(1..6), rng.gen_range(1..6)];
            Layer::Conv2d {
                in_ch: rng.gen_range(1..8),
                out_ch: rng.gen_range(1..16),
                kernel: k,
                stride: [rng.gen_range(1..4), rng.gen_range(1..4)],
                in_hw: [rng.gen_range(k[0]..40), rng.gen_range(k[1]..40)],
                padding: [rng.gen_range(0..3), rng.gen_range(0..3)],
                frames: rng.gen_range(1..5),
            }
        }
        2 => Layer::Attention {
            groups: rng.gen_range(1..10),
            seq_len: rng.gen_range(1..30),
            hidden,
            heads,
        },
        3 => Layer::Mlp {
            tokens: rng.gen_range(1..30),
            dims: (0..rng.gen_range(2..6)).map(|_| rng.gen_range(1..100)).collect(),
        },
        4 => Layer::TransformerBlock {
            tokens: rng.gen_range(1..30),
            hidden,
            heads,
            ffn_hidden: rng.gen_range(1..128),
        },
        5 => Layer::Norm {
            tokens: rng.gen_range(1..30),
            dim: rng.gen_range(1..100),
        },
        _ => Layer::Elementwise {
            elements: rng.gen_range(1..1000),
            inputs: rng.gen_range(1..3),
        },
    }
}
