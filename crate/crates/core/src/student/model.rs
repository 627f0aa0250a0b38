use std::rc::Rc;

use ndarray::{Array2, Axis};

use super::config::StudentConfig;
use crate::error::{Error, Result};
use crate::features::GazeInput;
use crate::gaze::FEATURE_WIDTH;
use crate::nn::layers::{Linear, TransformerEncoder};
use crate::nn::{stream_rng, Graph, Init, ParamId, ParamStore, Var};
use crate::scalar::Scalar;

/// Number of learned tokens in front of the gaze tokens: class,
/// distillation and action.
pub const SPECIAL_TOKENS: usize = 3;

/// Graph handles of a batched student forward pass, one row per sample.
#[derive(Debug, Clone, Copy)]
pub struct StudentVars {
    /// Distillation-token features `[B, width]`.
    pub e_s_hat: Var,
    pub skill_logits: Var,
    pub action_logits: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentOutput<T> {
    pub e_s_hat: Vec<T>,
    pub skill_logits: Vec<T>,
    pub action_logits: Vec<T>,
}

/// Gaze-only transformer over `[t_cls, t_dis, t_act, gaze tokens]`.
///
/// Inference accepts [`GazeInput`] only, which carries normalized gaze rows
/// and nothing derived from frames.
#[derive(Debug, Clone)]
pub struct Student<T> {
    pub config: StudentConfig,
    pub store: ParamStore<T>,
    pub input: Linear,
    /// `[3, width]`: class, distillation, action.
    pub tokens: ParamId,
    /// `[frames, width]` positional table of the gaze tokens.
    pub pos: ParamId,
    pub encoder: TransformerEncoder,
    pub skill_head: Linear,
    pub action_head: Linear,
    /// Student-side projection into the common space.
    pub f_p: Linear,
    /// Teacher-side projection into the common space.
    pub f_t: Linear,
    pub teacher_dim: usize,
}

impl<T: Scalar> Student<T> {
    pub fn new(config: StudentConfig, teacher_dim: usize) -> Result<Self> {
        config.validate()?;
        if teacher_dim == 0 {
            return Err(Error::Config("teacher embedding width must be > 0".into()));
        }
        let seed = config.seed;
        let w = config.encoder.width;
        let mut store = ParamStore::new();
        let mut rng = stream_rng(seed, "student.input");
        let input = Linear::new(&mut store, &mut rng, "student.input", FEATURE_WIDTH, w);
        let mut rng = stream_rng(seed, "student.tokens");
        let tokens = store.init("student.tokens", (SPECIAL_TOKENS, w), Init::Normal(0.02), &mut rng);
        let pos = store.init("student.pos", (config.frames, w), Init::Normal(0.02), &mut rng);
        let mut rng = stream_rng(seed, "student.encoder");
        let e = &config.encoder;
        let encoder = TransformerEncoder::new(
            &mut store,
            &mut rng,
            "student.encoder",
            e.layers,
            w,
            e.heads,
            e.ffn_hidden,
        );
        let mut rng = stream_rng(seed, "student.heads");
        let skill_head = Linear::new(&mut store, &mut rng, "student.skill_head", w, config.k_classes);
        let action_head = Linear::new(&mut store, &mut rng, "student.action_head", w, config.n_subtasks());
        let mut rng = stream_rng(seed, "student.projections");
        let common = config.common_dim();
        let f_p = Linear::new(&mut store, &mut rng, "student.f_p", w, common);
        let f_t = Linear::new(&mut store, &mut rng, "student.f_t", teacher_dim, common);
        Ok(Self {
            config,
            store,
            input,
            tokens,
            pos,
            encoder,
            skill_head,
            action_head,
            f_p,
            f_t,
            teacher_dim,
        })
    }

    fn check(&self, gaze: &GazeInput<T>) -> Result<()> {
        if gaze.frames() != self.config.frames {
            return Err(Error::Shape(format!(
                "student expects {} gaze rows, got {}",
                self.config.frames,
                gaze.frames()
            )));
        }
        Ok(())
    }

    /// Batched forward over independent clips.
    pub fn forward_graph(&self, g: &mut Graph<T>, batch: &[&GazeInput<T>]) -> Result<StudentVars> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("empty student batch".into()));
        }
        for x in batch {
            self.check(x)?;
        }
        let f = self.config.frames;
        let b = batch.len();
        let seq = SPECIAL_TOKENS + f;
        let views: Vec<_> = batch.iter().map(|x| x.matrix().view()).collect();
        let stacked = ndarray::concatenate(Axis(0), &views).expect("equal widths");
        let x = g.leaf(stacked);
        let proj = self.input.forward(g, &self.store, x);
        let pos = g.param(&self.store, self.pos);
        let pos = g.row_combine(pos, b * f, Rc::new((0..b * f).map(|r| (r, r % f, T::one())).collect()));
        let proj = g.add(proj, pos);
        let tokens = g.param(&self.store, self.tokens);
        let all = g.concat_rows(&[tokens, proj]);
        let layout = (0..b)
            .flat_map(|i| {
                (0..seq).map(move |k| {
                    let src = if k < SPECIAL_TOKENS {
                        k
                    } else {
                        SPECIAL_TOKENS + i * f + k - SPECIAL_TOKENS
                    };
                    (i * seq + k, src, T::one())
                })
            })
            .collect();
        let x = g.row_combine(all, b * seq, Rc::new(layout));
        let h = self.encoder.forward_grouped(g, &self.store, x, seq)?;
        let rows = |k: usize| (0..b).map(|i| i * seq + k).collect::<Vec<_>>();
        let cls = g.gather_rows(h, &rows(0));
        let dis = g.gather_rows(h, &rows(1));
        let act = g.gather_rows(h, &rows(2));
        let skill_logits = self.skill_head.forward(g, &self.store, cls);
        let action_logits = self.action_head.forward(g, &self.store, act);
        Ok(StudentVars {
            e_s_hat: dis,
            skill_logits,
            action_logits,
        })
    }

    pub fn forward(&self, gaze: &GazeInput<T>) -> Result<StudentOutput<T>> {
        let mut g = Graph::new();
        let v = self.forward_graph(&mut g, &[gaze])?;
        let row = |v: Var| g.value(v).iter().copied().collect::<Vec<T>>();
        Ok(StudentOutput {
            e_s_hat: row(v.e_s_hat),
            skill_logits: row(v.skill_logits),
            action_logits: row(v.action_logits),
        })
    }

    /// `mean |f_p(e_s_hat) - f_t(teacher)|` over batch and common
    /// dimensions. The teacher rows enter as constants.
    pub fn distillation_loss(&self, g: &mut Graph<T>, e_s_hat: Var, teacher: &Array2<T>) -> Result<Var> {
        if teacher.ncols() != self.teacher_dim {
            return Err(Error::Shape(format!(
                "teacher embedding width {} vs expected {}",
                teacher.ncols(),
                self.teacher_dim
            )));
        }
        let t = g.leaf(teacher.clone());
        let ps = self.f_p.forward(g, &self.store, e_s_hat);
        let pt = self.f_t.forward(g, &self.store, t);
        g.l1_mean(ps, pt)
    }
}
