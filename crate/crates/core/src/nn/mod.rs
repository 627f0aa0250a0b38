//! Minimal neural-network toolkit: a tape-based autodiff graph, parameter
//! storage, transformer building blocks and optimizers.

mod graph;
pub mod layers;
pub mod optim;
mod params;

pub(crate) use graph::softmax_rows_inplace;
pub use graph::{AttentionBias, Gradients, Graph, Var};
pub use params::{stream_rng, Init, ParamId, ParamRecord, ParamStore};
