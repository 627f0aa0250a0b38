//! Building blocks assembled by the teacher and student models.

use rand::Rng;

use super::graph::{AttentionBias, Graph, Var};
use super::params::{Init, ParamId, ParamStore};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    pub fn apply<T: Scalar>(self, g: &mut Graph<T>, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Gelu => g.gelu(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        d_in: usize,
        d_out: usize,
    ) -> Self {
        let weight = store.init(format!("{name}.weight"), (d_in, d_out), Init::Xavier, rng);
        let bias = store.init(format!("{name}.bias"), (1, d_out), Init::Zeros, rng);
        Self {
            weight,
            bias,
            d_in,
            d_out,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Var {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xw = g.matmul(x, w);
        g.add_row(xw, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R, name: &str, dim: usize) -> Self {
        let gamma = store.init(format!("{name}.gamma"), (1, dim), Init::Ones, rng);
        let beta = store.init(format!("{name}.beta"), (1, dim), Init::Zeros, rng);
        Self { gamma, beta }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Var {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        g.layer_norm(x, gamma, beta)
    }
}

/// Stack of linear layers with an activation between consecutive layers
/// (none after the last).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        widths: &[usize],
        activation: Activation,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, rng, &format!("{name}.{i}"), w[0], w[1]))
            .collect();
        Self { layers, activation }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, mut x: Var) -> Var {
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, store, x);
            if i < last {
                x = self.activation.apply(g, x);
            }
        }
        x
    }
}

/// Pre-norm multi-head self-attention; returns the residual branch only.
#[derive(Debug, Clone)]
pub struct AttentionSublayer {
    pub norm: LayerNorm,
    pub qkv: Linear,
    pub proj: Linear,
    pub heads: usize,
}

impl AttentionSublayer {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        width: usize,
        heads: usize,
    ) -> Self {
        Self {
            norm: LayerNorm::new(store, rng, &format!("{name}.norm"), width),
            qkv: Linear::new(store, rng, &format!("{name}.qkv"), width, 3 * width),
            proj: Linear::new(store, rng, &format!("{name}.proj"), width, width),
            heads,
        }
    }

    /// `x` holds consecutive groups of `seq_len` rows; attention stays within
    /// each group.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
        seq_len: usize,
        bias: Option<AttentionBias<T>>,
    ) -> Result<Var> {
        let h = self.norm.forward(g, store, x);
        let qkv = self.qkv.forward(g, store, h);
        let a = g.attention(qkv, seq_len, self.heads, bias)?;
        Ok(self.proj.forward(g, store, a))
    }
}

/// Pre-norm position-wise feed-forward; returns the residual branch only.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub norm: LayerNorm,
    pub mlp: Mlp,
}

impl FeedForward {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        width: usize,
        hidden: usize,
    ) -> Self {
        Self {
            norm: LayerNorm::new(store, rng, &format!("{name}.norm"), width),
            mlp: Mlp::new(
                store,
                rng,
                &format!("{name}.mlp"),
                &[width, hidden, width],
                Activation::Gelu,
            ),
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Var {
        let h = self.norm.forward(g, store, x);
        self.mlp.forward(g, store, h)
    }
}

#[derive(Debug, Clone)]
pub struct EncoderBlock {
    pub attn: AttentionSublayer,
    pub ff: FeedForward,
}

impl EncoderBlock {
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var, seq_len: usize) -> Result<Var> {
        let a = self.attn.forward(g, store, x, seq_len, None)?;
        let x = g.add(x, a);
        let f = self.ff.forward(g, store, x);
        Ok(g.add(x, f))
    }
}

/// Plain pre-norm transformer encoder over a single token sequence with a
/// final layer norm.
#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    pub blocks: Vec<EncoderBlock>,
    pub final_norm: LayerNorm,
    pub width: usize,
}

impl TransformerEncoder {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        layers: usize,
        width: usize,
        heads: usize,
        ffn_hidden: usize,
    ) -> Self {
        let blocks = (0..layers)
            .map(|i| EncoderBlock {
                attn: AttentionSublayer::new(store, rng, &format!("{name}.block{i}.attn"), width, heads),
                ff: FeedForward::new(store, rng, &format!("{name}.block{i}.ff"), width, ffn_hidden),
            })
            .collect();
        Self {
            blocks,
            final_norm: LayerNorm::new(store, rng, &format!("{name}.final_norm"), width),
            width,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let seq_len = g.shape(x).0;
        self.forward_grouped(g, store, x, seq_len)
    }

    /// Encodes consecutive independent sequences of `seq_len` rows each.
    pub fn forward_grouped<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        mut x: Var,
        seq_len: usize,
    ) -> Result<Var> {
        for block in &self.blocks {
            x = block.forward(g, store, x, seq_len)?;
        }
        Ok(self.final_norm.forward(g, store, x))
    }
}
