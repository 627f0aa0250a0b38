use std::rc::Rc;

use ndarray::Array2;

use super::config::{EncoderConfig, TeacherConfig};
use crate::error::{Error, Result};
use crate::features::{GazeInput, VisualGeometry, VisualInput};
use crate::gaze::FEATURE_WIDTH;
use crate::nn::layers::{Activation, AttentionSublayer, FeedForward, LayerNorm, Linear, Mlp, TransformerEncoder};
use crate::nn::{stream_rng, AttentionBias, Graph, Init, ParamId, ParamStore, Var};
use crate::scalar::Scalar;

type Entries<T> = Rc<Vec<(usize, usize, T)>>;

/// Learned class token plus positional table in front of a token sequence.
#[derive(Debug, Clone)]
pub struct TokenPrefix {
    pub cls: ParamId,
    pub pos: ParamId,
}

impl TokenPrefix {
    fn new<T: Scalar>(store: &mut ParamStore<T>, seed: u64, name: &str, tokens: usize, width: usize) -> Self {
        let mut rng = stream_rng(seed, name);
        Self {
            cls: store.init(format!("{name}.cls"), (1, width), Init::Normal(0.02), &mut rng),
            pos: store.init(format!("{name}.pos"), (tokens + 1, width), Init::Normal(0.02), &mut rng),
        }
    }

    /// `[cls; tokens] + pos`.
    fn apply<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, tokens: Var) -> Var {
        let cls = g.param(store, self.cls);
        let pos = g.param(store, self.pos);
        let seq = g.concat_rows(&[cls, tokens]);
        g.add(seq, pos)
    }
}

/// Transformer over `[cls; tokens]` returning the class-token output.
#[derive(Debug, Clone)]
pub struct SequenceEncoder {
    pub input: Linear,
    pub prefix: TokenPrefix,
    pub encoder: TransformerEncoder,
}

impl SequenceEncoder {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        name: &str,
        d_in: usize,
        tokens: usize,
        cfg: &EncoderConfig,
    ) -> Self {
        let mut rng = stream_rng(seed, &format!("{name}.input"));
        let input = Linear::new(store, &mut rng, &format!("{name}.input"), d_in, cfg.width);
        let prefix = TokenPrefix::new(store, seed, name, tokens, cfg.width);
        let mut rng = stream_rng(seed, &format!("{name}.encoder"));
        let encoder = TransformerEncoder::new(
            store,
            &mut rng,
            &format!("{name}.encoder"),
            cfg.layers,
            cfg.width,
            cfg.heads,
            cfg.ffn_hidden,
        );
        Self { input, prefix, encoder }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let tokens = self.input.forward(g, store, x);
        self.forward_tokens(g, store, tokens)
    }

    /// Same as [`forward`](Self::forward) for inputs already at model width.
    pub fn forward_tokens<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, tokens: Var) -> Result<Var> {
        let seq = self.prefix.apply(g, store, tokens);
        let out = self.encoder.forward(g, store, seq)?;
        Ok(g.slice_rows(out, 0, 1))
    }
}

#[derive(Debug, Clone)]
struct DividedBlock {
    temporal: AttentionSublayer,
    temporal_fc: Linear,
    spatial: AttentionSublayer,
    ff: FeedForward,
}

/// Divided space-time attention video transformer. The state is
/// `[cls; patches]` with patches frame-major. Each block applies temporal
/// attention per patch position, spatial attention per frame over
/// `[cls; frame patches]` (the class token's per-frame outputs are averaged),
/// then a feed-forward sublayer.
#[derive(Debug, Clone)]
pub struct VideoEncoder {
    embed: Linear,
    cls: ParamId,
    pos_space: ParamId,
    pos_time: ParamId,
    blocks: Vec<DividedBlock>,
    final_norm: LayerNorm,
    /// Per-scenario gaze weights `[scenarios, 1]`; absent when the gaze
    /// attention hook is removed.
    lambda: Option<ParamId>,
    frames: usize,
    patches: usize,
    pub width: usize,
}

impl VideoEncoder {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        cfg: &EncoderConfig,
        frames: usize,
        geo: &VisualGeometry,
        lambdas: Option<&[f64]>,
    ) -> Self {
        let w = cfg.width;
        let pp = geo.patches_per_frame();
        let mut rng = stream_rng(seed, "video.embed");
        let embed = Linear::new(store, &mut rng, "video.embed", geo.patch_dim(), w);
        let mut rng = stream_rng(seed, "video.tokens");
        let cls = store.init("video.cls", (1, w), Init::Normal(0.02), &mut rng);
        let pos_space = store.init("video.pos_space", (pp, w), Init::Normal(0.02), &mut rng);
        let pos_time = store.init("video.pos_time", (frames, w), Init::Normal(0.02), &mut rng);
        let blocks = (0..cfg.layers)
            .map(|i| {
                let name = format!("video.block{i}");
                let mut rng = stream_rng(seed, &name);
                DividedBlock {
                    temporal: AttentionSublayer::new(store, &mut rng, &format!("{name}.temporal"), w, cfg.heads),
                    temporal_fc: Linear::new(store, &mut rng, &format!("{name}.temporal_fc"), w, w),
                    spatial: AttentionSublayer::new(store, &mut rng, &format!("{name}.spatial"), w, cfg.heads),
                    ff: FeedForward::new(store, &mut rng, &format!("{name}.ff"), w, cfg.ffn_hidden),
                }
            })
            .collect();
        let mut rng = stream_rng(seed, "video.final_norm");
        let final_norm = LayerNorm::new(store, &mut rng, "video.final_norm", w);
        let lambda = lambdas.map(|l| {
            store.add(
                "video.lambda",
                Array2::from_shape_fn((l.len(), 1), |(i, _)| T::of(l[i])),
            )
        });
        Self {
            embed,
            cls,
            pos_space,
            pos_time,
            blocks,
            final_norm,
            lambda,
            frames,
            patches: pp,
            width: w,
        }
    }

    pub fn lambda_param(&self) -> Option<ParamId> {
        self.lambda
    }

    /// Class-token embedding `[1, width]`. `gaze_maps` is `[frames, p*p]`;
    /// it is only used when the gaze hook exists.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        input: &VisualInput<T>,
        scenario: usize,
    ) -> Result<Var> {
        let (f, pp) = (self.frames, self.patches);
        if input.patches.nrows() != f * pp || input.gaze_maps.dim() != (f, pp) {
            return Err(Error::Shape(format!(
                "video input has {} patch rows and maps {:?}, expected {} and [{f}, {pp}]",
                input.patches.nrows(),
                input.gaze_maps.dim(),
                f * pp
            )));
        }
        let n = 1 + f * pp;
        let x = g.leaf(input.patches.clone());
        let tokens = self.embed.forward(g, store, x);
        let ps = g.param(store, self.pos_space);
        let pt = g.param(store, self.pos_time);
        let ps = g.row_combine(ps, f * pp, tile(f, pp, |_, j| j));
        let pt = g.row_combine(pt, f * pp, tile(f, pp, |fr, _| fr));
        let tokens = g.add(tokens, ps);
        let tokens = g.add(tokens, pt);
        let cls = g.param(store, self.cls);
        let mut state = g.concat_rows(&[cls, tokens]);

        let to_time: Vec<usize> = (0..pp).flat_map(|j| (0..f).map(move |fr| 1 + fr * pp + j)).collect();
        let from_time: Entries<T> = Rc::new(to_time.iter().enumerate().map(|(r, &s)| (s, r, T::one())).collect());
        let seq = pp + 1;
        let to_space: Entries<T> = Rc::new(
            (0..f)
                .flat_map(|fr| {
                    (0..seq).map(move |k| (fr * seq + k, if k == 0 { 0 } else { 1 + fr * pp + k - 1 }, T::one()))
                })
                .collect(),
        );
        let inv_f = T::one() / T::of(f as f64);
        let from_space: Entries<T> = Rc::new(
            (0..f)
                .flat_map(|fr| {
                    (0..seq).map(move |k| {
                        if k == 0 {
                            (0, fr * seq, inv_f)
                        } else {
                            (1 + fr * pp + k - 1, fr * seq + k, T::one())
                        }
                    })
                })
                .collect(),
        );

        for (i, block) in self.blocks.iter().enumerate() {
            let xt = g.gather_rows(state, &to_time);
            let a = block.temporal.forward(g, store, xt, f, None)?;
            let a = block.temporal_fc.forward(g, store, a);
            let back = g.row_combine(a, n, from_time.clone());
            state = g.add(state, back);

            let xs = g.row_combine(state, f * seq, to_space.clone());
            let bias = match (i, self.lambda) {
                (0, Some(lam)) => {
                    let mut keys = Array2::zeros((f, seq));
                    keys.slice_mut(ndarray::s![.., 1..]).assign(&input.gaze_maps);
                    let scale = g.param(store, lam);
                    let scale = g.pick(scale, scenario, 0);
                    Some(AttentionBias {
                        keys: Rc::new(keys),
                        scale,
                    })
                }
                _ => None,
            };
            let a = block.spatial.forward(g, store, xs, seq, bias)?;
            let back = g.row_combine(a, n, from_space.clone());
            state = g.add(state, back);

            let ff = block.ff.forward(g, store, state);
            state = g.add(state, ff);
        }
        let cls_out = g.slice_rows(state, 0, 1);
        Ok(self.final_norm.forward(g, store, cls_out))
    }
}

fn tile<T: Scalar>(frames: usize, patches: usize, src: impl Fn(usize, usize) -> usize) -> Entries<T> {
    Rc::new(
        (0..frames)
            .flat_map(|fr| (0..patches).map(move |j| (fr, j)))
            .map(|(fr, j)| (fr * patches + j, src(fr, j), T::one()))
            .collect(),
    )
}

/// Gaze-crop encoder: a per-frame image embedder followed by a temporal
/// transformer over the frame embeddings.
#[derive(Debug, Clone)]
pub struct CropEncoder {
    stem: Linear,
    project: Linear,
    temporal: SequenceEncoder,
    crop_patches: usize,
    frames: usize,
}

impl CropEncoder {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, seed: u64, cfg: &TeacherConfig, geo: &VisualGeometry) -> Self {
        let channels = match cfg.crop.image_encoder {
            super::config::ImageEncoderSpec::StubSmall { channels, .. } => channels,
            super::config::ImageEncoderSpec::ExternalPretrained { dim, .. } => dim,
        };
        let width = cfg.crop.temporal.width;
        let mut rng = stream_rng(seed, "crop.image");
        let stem = Linear::new(store, &mut rng, "crop.image.stem", geo.crop_patch_dim(), channels);
        let project = Linear::new(store, &mut rng, "crop.image.project", channels, width);
        // Frame embeddings are already at model width, so the sequence
        // encoder's input projection is identity-sized.
        let temporal = SequenceEncoder::new(store, seed, "crop.temporal", width, cfg.frames, &cfg.crop.temporal);
        Self {
            stem,
            project,
            temporal,
            crop_patches: geo.crop_patches(),
            frames: cfg.frames,
        }
    }

    /// Per-frame crop embeddings `[frames, width]`.
    pub fn embed_frames<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, crops: Var) -> Var {
        let q = self.crop_patches;
        let h = self.stem.forward(g, store, crops);
        let h = g.relu(h);
        let w = T::one() / T::of(q as f64);
        let pool: Entries<T> = Rc::new(
            (0..self.frames)
                .flat_map(|fr| (0..q).map(move |j| (fr, fr * q + j, w)))
                .collect(),
        );
        let pooled = g.row_combine(h, self.frames, pool);
        self.project.forward(g, store, pooled)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, input: &VisualInput<T>) -> Result<Var> {
        if input.crop_patches.nrows() != self.frames * self.crop_patches {
            return Err(Error::Shape(format!(
                "crop input has {} rows, expected {}",
                input.crop_patches.nrows(),
                self.frames * self.crop_patches
            )));
        }
        let x = g.leaf(input.crop_patches.clone());
        let emb = self.embed_frames(g, store, x);
        self.temporal.forward(g, store, emb)
    }
}

/// Gaze-dynamics encoder over normalized feature rows.
#[derive(Debug, Clone)]
pub struct GazeEncoder {
    seq: SequenceEncoder,
    frames: usize,
}

impl GazeEncoder {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        seed: u64,
        name: &str,
        frames: usize,
        cfg: &EncoderConfig,
    ) -> Self {
        Self {
            seq: SequenceEncoder::new(store, seed, name, FEATURE_WIDTH, frames, cfg),
            frames,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, gaze: &GazeInput<T>) -> Result<Var> {
        if gaze.frames() != self.frames {
            return Err(Error::Shape(format!(
                "gaze input has {} rows, expected {}",
                gaze.frames(),
                self.frames
            )));
        }
        let x = g.leaf(gaze.matrix().clone());
        self.seq.forward(g, store, x)
    }
}

/// Graph handles for one teacher forward pass.
#[derive(Debug, Clone, Copy)]
pub struct TeacherVars {
    pub e_v: Var,
    pub e_c: Option<Var>,
    pub e_g: Option<Var>,
    pub logits: Var,
}

/// Concrete embedding values for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherEmbeddings<T> {
    pub e_v: Vec<T>,
    /// Empty when the crop encoder is disabled.
    pub e_c: Vec<T>,
    /// Empty when the gaze encoder is disabled.
    pub e_g: Vec<T>,
    pub logits: Vec<T>,
}

impl<T: Scalar> TeacherEmbeddings<T> {
    /// `[e_v, e_c, e_g]` with disabled parts zero-filled to full width.
    pub fn concat(&self, cfg: &TeacherConfig) -> Vec<T> {
        let mut out = self.e_v.clone();
        let mut part = |v: &[T], w: usize| {
            if v.is_empty() {
                out.extend(std::iter::repeat(T::zero()).take(w));
            } else {
                out.extend_from_slice(v);
            }
        };
        part(&self.e_c, cfg.crop.temporal.width);
        part(&self.e_g, cfg.gaze.width);
        out
    }
}

/// Video transformer with gaze attention, gaze-crop and gaze-dynamics
/// encoders, fused by a 3-layer MLP.
#[derive(Debug, Clone)]
pub struct Teacher<T> {
    pub config: TeacherConfig,
    pub store: ParamStore<T>,
    pub video: VideoEncoder,
    pub crop: Option<CropEncoder>,
    pub gaze: Option<GazeEncoder>,
    pub fusion: Mlp,
    geometry: VisualGeometry,
}

pub fn geometry(cfg: &TeacherConfig) -> VisualGeometry {
    VisualGeometry::from_attention(
        &cfg.attention,
        cfg.crop.crop_frac,
        cfg.crop.input_size,
        cfg.crop_patch(),
    )
}

impl<T: Scalar> Teacher<T> {
    pub fn new(config: TeacherConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let geo = geometry(&config);
        let mut store = ParamStore::new();
        let lambdas: Vec<f64> = config
            .attention
            .scenarios
            .iter()
            .map(|_| config.attention.lambda_init)
            .collect();
        let video = VideoEncoder::new(
            &mut store,
            seed,
            &config.video,
            config.frames,
            &geo,
            config.ablation.gaze_attention.then_some(lambdas.as_slice()),
        );
        let crop = config
            .ablation
            .crop_encoder
            .then(|| CropEncoder::new(&mut store, seed, &config, &geo));
        let gaze = config
            .ablation
            .gaze_encoder
            .then(|| GazeEncoder::new(&mut store, seed, "gaze", config.frames, &config.gaze));
        let fusion = fusion_mlp(&mut store, seed, &config, config.fusion_input());
        Ok(Self {
            config,
            store,
            video,
            crop,
            gaze,
            fusion,
            geometry: geo,
        })
    }

    pub fn geometry(&self) -> &VisualGeometry {
        &self.geometry
    }

    pub fn forward_graph(
        &self,
        g: &mut Graph<T>,
        visual: &VisualInput<T>,
        gaze: &GazeInput<T>,
        scenario: usize,
    ) -> Result<TeacherVars> {
        let store = &self.store;
        let e_v = self.video.forward(g, store, visual, scenario)?;
        let e_c = self.crop.as_ref().map(|c| c.forward(g, store, visual)).transpose()?;
        let e_g = self.gaze.as_ref().map(|e| e.forward(g, store, gaze)).transpose()?;
        let parts: Vec<Var> = [Some(e_v), e_c, e_g].into_iter().flatten().collect();
        let fused = g.concat_cols(&parts);
        let logits = self.fusion.forward(g, store, fused);
        Ok(TeacherVars { e_v, e_c, e_g, logits })
    }

    pub fn forward(
        &self,
        visual: &VisualInput<T>,
        gaze: &GazeInput<T>,
        scenario: usize,
    ) -> Result<TeacherEmbeddings<T>> {
        let mut g = Graph::new();
        let v = self.forward_graph(&mut g, visual, gaze, scenario)?;
        let row = |g: &Graph<T>, v: Option<Var>| v.map(|v| g.value(v).iter().copied().collect()).unwrap_or_default();
        Ok(TeacherEmbeddings {
            e_v: row(&g, Some(v.e_v)),
            e_c: row(&g, v.e_c),
            e_g: row(&g, v.e_g),
            logits: row(&g, Some(v.logits)),
        })
    }

    /// Current per-scenario gaze attention weights.
    pub fn lambdas(&self) -> Vec<(String, f64)> {
        match self.video.lambda_param() {
            Some(id) => self
                .config
                .attention
                .scenarios
                .iter()
                .zip(self.store.value(id).iter())
                .map(|(s, v)| (s.clone(), v.as_f64()))
                .collect(),
            None => Vec::new(),
        }
    }
}

fn fusion_mlp<T: Scalar>(store: &mut ParamStore<T>, seed: u64, cfg: &TeacherConfig, d_in: usize) -> Mlp {
    let mut rng = stream_rng(seed, "fusion");
    let [h1, h2] = cfg.fusion_hidden;
    Mlp::new(
        store,
        &mut rng,
        "fusion",
        &[d_in, h1, h2, cfg.k_classes],
        Activation::Relu,
    )
}

/// The teacher's video branch alone with the same classification head: the
/// reference model that the fully ablated teacher must reproduce.
#[derive(Debug, Clone)]
pub struct VideoClassifier<T> {
    pub store: ParamStore<T>,
    pub video: VideoEncoder,
    pub head: Mlp,
}

impl<T: Scalar> VideoClassifier<T> {
    pub fn new(cfg: &TeacherConfig) -> Result<Self> {
        cfg.validate()?;
        let geo = geometry(cfg);
        let mut store = ParamStore::new();
        let video = VideoEncoder::new(&mut store, cfg.seed, &cfg.video, cfg.frames, &geo, None);
        let head = fusion_mlp(&mut store, cfg.seed, cfg, cfg.video.width);
        Ok(Self { store, video, head })
    }

    pub fn forward_graph(&self, g: &mut Graph<T>, visual: &VisualInput<T>) -> Result<Var> {
        let e_v = self.video.forward(g, &self.store, visual, 0)?;
        Ok(self.head.forward(g, &self.store, e_v))
    }
}
