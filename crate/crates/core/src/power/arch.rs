//! Architecture descriptions and analytic MAC / memory-traffic counting.
//!
//! One MAC is one multiply-accumulate (two FLOPs). Byte traffic is the sum
//! over every elementary operation of its input, output and parameter
//! values touched, at 4 bytes per value.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const BYTES_PER_VALUE: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layer {
    /// `tokens x d_in -> tokens x d_out`.
    Linear {
        tokens: u64,
        d_in: u64,
        d_out: u64,
        #[serde(default = "yes")]
        bias: bool,
    },
    /// 2D convolution applied independently to `frames` images.
    Conv2d {
        in_ch: u64,
        out_ch: u64,
        kernel: [u64; 2],
        stride: [u64; 2],
        in_hw: [u64; 2],
        #[serde(default)]
        padding: [u64; 2],
        #[serde(default = "one")]
        frames: u64,
    },
    /// Multi-head self-attention within `groups` independent sequences of
    /// `seq_len` tokens: qkv projection, scores, softmax, weighted sum and
    /// output projection.
    Attention {
        groups: u64,
        seq_len: u64,
        hidden: u64,
        heads: u64,
    },
    /// Linear layers with elementwise activations in between.
    Mlp {
        tokens: u64,
        dims: Vec<u64>,
    },
    /// Pre-norm block: norm, attention, residual, norm, FFN, residual.
    TransformerBlock {
        tokens: u64,
        hidden: u64,
        heads: u64,
        ffn_hidden: u64,
    },
    Norm {
        tokens: u64,
        dim: u64,
    },
    /// Elementwise op (activation, residual add input) over `elements`
    /// values with `inputs` operands.
    Elementwise {
        elements: u64,
        #[serde(default = "one")]
        inputs: u64,
    },
}

fn yes() -> bool {
    true
}

fn one() -> u64 {
    1
}

const KINDS: [&str; 7] = [
    "linear",
    "conv2d",
    "attention",
    "mlp",
    "transformer_block",
    "norm",
    "elementwise",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub name: String,
    pub layers: Vec<Layer>,
}

impl Architecture {
    pub fn new(name: impl Into<String>, layers: Vec<Layer>) -> Self {
        Self {
            name: name.into(),
            layers,
        }
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self::new(name, Vec::new())
    }

    /// Sequential composition.
    pub fn then(mut self, other: Architecture) -> Self {
        self.layers.extend(other.layers);
        self
    }

    /// Parses the JSON description, reporting unsupported layer kinds by
    /// name.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::format("architecture", e.to_string()))?;
        let layers = value
            .get("layers")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::format("architecture", "missing `layers` array"))?;
        for (i, l) in layers.iter().enumerate() {
            let kind = l
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::format(format!("architecture layer {i}"), "missing `kind`"))?;
            if !KINDS.contains(&kind) {
                return Err(Error::UnsupportedLayer(kind.to_string()));
            }
        }
        serde_json::from_value(value).map_err(|e| Error::format("architecture", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_json(&text)
    }
}

fn linear_macs(tokens: u64, d_in: u64, d_out: u64) -> u64 {
    tokens * d_in * d_out
}

fn linear_bytes(tokens: u64, d_in: u64, d_out: u64, bias: bool) -> u64 {
    let params = d_in * d_out + if bias { d_out } else { 0 };
    BYTES_PER_VALUE * (tokens * d_in + tokens * d_out + params)
}

fn conv_out(in_hw: [u64; 2], kernel: [u64; 2], stride: [u64; 2], padding: [u64; 2]) -> [u64; 2] {
    let o = |i: usize| (in_hw[i] + 2 * padding[i]).saturating_sub(kernel[i]) / stride[i].max(1) + 1;
    [o(0), o(1)]
}

impl Layer {
    pub fn macs(&self) -> u64 {
        match *self {
            Layer::Linear {
                tokens, d_in, d_out, ..
            } => linear_macs(tokens, d_in, d_out),
            Layer::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                in_hw,
                padding,
                frames,
            } => {
                let [oh, ow] = conv_out(in_hw, kernel, stride, padding);
                frames * oh * ow * out_ch * in_ch * kernel[0] * kernel[1]
            }
            Layer::Attention {
                groups,
                seq_len,
                hidden,
                ..
            } => {
                let tokens = groups * seq_len;
                let qkv = linear_macs(tokens, hidden, 3 * hidden);
                let scores = groups * seq_len * seq_len * hidden;
                let weighted = groups * seq_len * seq_len * hidden;
                let proj = linear_macs(tokens, hidden, hidden);
                qkv + scores + weighted + proj
            }
            Layer::Mlp { tokens, ref dims } => dims.windows(2).map(|w| linear_macs(tokens, w[0], w[1])).sum(),
            Layer::TransformerBlock {
                tokens,
                hidden,
                heads,
                ffn_hidden,
            } => self::block_parts(tokens, hidden, heads, ffn_hidden)
                .iter()
                .map(Layer::macs)
                .sum(),
            Layer::Norm { .. } | Layer::Elementwise { .. } => 0,
        }
    }

    pub fn bytes(&self) -> u64 {
        match *self {
            Layer::Linear {
                tokens,
                d_in,
                d_out,
                bias,
            } => linear_bytes(tokens, d_in, d_out, bias),
            Layer::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                in_hw,
                padding,
                frames,
            } => {
                let [oh, ow] = conv_out(in_hw, kernel, stride, padding);
                let input = frames * in_ch * in_hw[0] * in_hw[1];
                let output = frames * out_ch * oh * ow;
                let params = out_ch * in_ch * kernel[0] * kernel[1] + out_ch;
                BYTES_PER_VALUE * (input + output + params)
            }
            Layer::Attention {
                groups,
                seq_len,
                hidden,
                heads,
            } => {
                let tokens = groups * seq_len;
                let scores = groups * heads * seq_len * seq_len;
                let qkv = linear_bytes(tokens, hidden, 3 * hidden, true);
                let score_op = BYTES_PER_VALUE * (2 * tokens * hidden + scores);
                let softmax = BYTES_PER_VALUE * (2 * scores);
                let weighted = BYTES_PER_VALUE * (scores + tokens * hidden + tokens * hidden);
                let proj = linear_bytes(tokens, hidden, hidden, true);
                qkv + score_op + softmax + weighted + proj
            }
            Layer::Mlp { tokens, ref dims } => {
                let linears: u64 = dims.windows(2).map(|w| linear_bytes(tokens, w[0], w[1], true)).sum();
                let acts: u64 = dims[1..dims.len().saturating_sub(1)]
                    .iter()
                    .map(|&d| BYTES_PER_VALUE * 2 * tokens * d)
                    .sum();
                linears + acts
            }
            Layer::TransformerBlock {
                tokens,
                hidden,
                heads,
                ffn_hidden,
            } => block_parts(tokens, hidden, heads, ffn_hidden)
                .iter()
                .map(Layer::bytes)
                .sum(),
            Layer::Norm { tokens, dim } => BYTES_PER_VALUE * (2 * tokens * dim + 2 * dim),
            Layer::Elementwise { elements, inputs } => BYTES_PER_VALUE * (inputs + 1) * elements,
        }
    }
}

fn block_parts(tokens: u64, hidden: u64, heads: u64, ffn_hidden: u64) -> [Layer; 6] {
    let residual = Layer::Elementwise {
        elements: tokens * hidden,
        inputs: 2,
    };
    [
        Layer::Norm { tokens, dim: hidden },
        Layer::Attention {
            groups: 1,
            seq_len: tokens,
            hidden,
            heads,
        },
        residual.clone(),
        Layer::Norm { tokens, dim: hidden },
        Layer::Mlp {
            tokens,
            dims: vec![hidden, ffn_hidden, hidden],
        },
        residual,
    ]
}

pub fn count_macs(arch: &Architecture) -> u64 {
    arch.layers.iter().map(Layer::macs).sum()
}

pub fn estimate_bytes(arch: &Architecture) -> u64 {
    arch.layers.iter().map(Layer::bytes).sum()
}
