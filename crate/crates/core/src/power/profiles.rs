//! Reference architectures for the published operating points.

use super::arch::{Architecture, Layer};

/// Gaze-only student at full scale: 16 gaze tokens projected to the hidden
/// width, three learned tokens, a 4-layer encoder and the skill head.
pub fn full_scale_student(feature_width: u64, k_classes: u64) -> Architecture {
    let hidden = 768;
    let tokens = 16 + 3;
    let mut layers = vec![Layer::Linear {
        tokens: 16,
        d_in: feature_width,
        d_out: hidden,
        bias: true,
    }];
    layers.extend((0..4).map(|_| Layer::TransformerBlock {
        tokens,
        hidden,
        heads: 12,
        ffn_hidden: 4 * hidden,
    }));
    layers.push(Layer::Norm { tokens, dim: hidden });
    layers.push(Layer::Linear {
        tokens: 1,
        d_in: hidden,
        d_out: k_classes,
        bias: true,
    });
    Architecture::new("skillsight-student-full", layers)
}

/// TimeSformer-base with divided space-time attention over a 16-frame,
/// 224x224 clip (14x14 patches of 16 px, 12 layers, width 768).
pub fn timesformer_base(frames: u64, k_classes: u64) -> Architecture {
    let hidden = 768;
    let patches = 14 * 14;
    let tokens = frames * patches + 1;
    let mut layers = vec![Layer::Conv2d {
        in_ch: 3,
        out_ch: hidden,
        kernel: [16, 16],
        stride: [16, 16],
        in_hw: [224, 224],
        padding: [0, 0],
        frames,
    }];
    for _ in 0..12 {
        let patch_tokens = frames * patches;
        layers.push(Layer::Norm {
            tokens: patch_tokens,
            dim: hidden,
        });
        layers.push(Layer::Attention {
            groups: patches,
            seq_len: frames,
            hidden,
            heads: 12,
        });
        layers.push(Layer::Linear {
            tokens: patch_tokens,
            d_in: hidden,
            d_out: hidden,
            bias: true,
        });
        layers.push(Layer::Elementwise {
            elements: patch_tokens * hidden,
            inputs: 2,
        });
        // Spatial attention sees the class token once per frame.
        layers.push(Layer::Norm {
            tokens: frames * (patches + 1),
            dim: hidden,
        });
        layers.push(Layer::Attention {
            groups: frames,
            seq_len: patches + 1,
            hidden,
            heads: 12,
        });
        layers.push(Layer::Elementwise {
            elements: tokens * hidden,
            inputs: 2,
        });
        layers.push(Layer::Norm { tokens, dim: hidden });
        layers.push(Layer::Mlp {
            tokens,
            dims: vec![hidden, 4 * hidden, hidden],
        });
        layers.push(Layer::Elementwise {
            elements: tokens * hidden,
            inputs: 2,
        });
    }
    layers.push(Layer::Norm { tokens: 1, dim: hidden });
    layers.push(Layer::Linear {
        tokens: 1,
        d_in: hidden,
        d_out: k_classes,
        bias: true,
    });
    Architecture::new("timesformer-base", layers)
}
