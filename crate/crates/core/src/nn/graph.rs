//! Reverse-mode automatic differentiation over row-major 2-D tensors.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its forward
//! value plus whatever it needs for the backward pass. Parameters enter the
//! tape through [`Graph::param`], and [`Graph::backward`] returns their
//! gradients keyed by [`ParamId`].

use std::rc::Rc;

use ndarray::{s, Array2, ArrayView2, Axis, Zip};

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Optional additive logit bias for [`Graph::attention`]: one row of key
/// biases per attention group, scaled by a learnable 1x1 scalar.
pub struct AttentionBias<T> {
    pub keys: Rc<Array2<T>>,
    pub scale: Var,
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<T>,
        inv_std: Vec<T>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    RowCombine {
        x: Var,
        entries: Rc<Vec<(usize, usize, T)>>,
    },
    Attention {
        qkv: Var,
        seq_len: usize,
        heads: usize,
        bias: Option<(Rc<Array2<T>>, Var)>,
        probs: Vec<Array2<T>>,
    },
    Pick(Var, usize, usize),
    MeanRows(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Array2<T>,
    },
    L1Mean(Var, Var),
    WeightedSum(Vec<(Var, T)>),
}

struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
}

/// Parameter gradients produced by one backward pass.
pub struct Gradients<T> {
    pub(crate) entries: Vec<(ParamId, Array2<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: ParamId) -> Option<&Array2<T>> {
        self.entries.iter().find(|(p, _)| *p == id).map(|(_, g)| g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<T>)> {
        self.entries.iter().map(|(p, g)| (*p, g))
    }
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn gelu_parts<T: Scalar>(x: T) -> (T, T) {
    // tanh approximation; returns (value, derivative)
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let k = T::of(0.044715);
    let half = T::of(0.5);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let value = half * x * (T::one() + t);
    let dinner = c * (T::one() + T::of(3.0) * k * x * x);
    let deriv = half * (T::one() + t) + half * x * (T::one() - t * t) * dinner;
    (value, deriv)
}

pub(crate) fn softmax_rows_inplace<T: Scalar>(m: &mut Array2<T>) {
    for mut row in m.rows_mut() {
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Constant input; receives no gradient.
    pub fn leaf(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// `a[m, n] + b[1, n]` broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::AddRow(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let v = self.value(a).mapv(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(T::zero()));
        self.push(v, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| gelu_parts(x).0);
        self.push(v, Op::Gelu(a))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let eps = T::of(1e-5);
        let xv = self.value(x);
        let (rows, cols) = xv.dim();
        let n = T::of(cols as f64);
        let mut xhat = Array2::zeros((rows, cols));
        let mut inv_std = Vec::with_capacity(rows);
        for (r, row) in xv.rows().into_iter().enumerate() {
            let mean = row.sum() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            for (c, &v) in row.iter().enumerate() {
                xhat[[r, c]] = (v - mean) * is;
            }
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<T>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<T>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("column counts agree");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start))
    }

    /// Sparse row mixing: `out[o] += w * x[i]` for every `(o, i, w)`.
    /// Covers gathers, scatters and row averages.
    pub fn row_combine(&mut self, x: Var, n_out: usize, entries: Rc<Vec<(usize, usize, T)>>) -> Var {
        let xv = self.value(x);
        let mut out = Array2::zeros((n_out, xv.ncols()));
        for &(o, i, w) in entries.iter() {
            out.row_mut(o).scaled_add(w, &xv.row(i));
        }
        self.push(out, Op::RowCombine { x, entries })
    }

    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Var {
        let entries: Vec<_> = rows.iter().enumerate().map(|(o, &i)| (o, i, T::one())).collect();
        self.row_combine(x, rows.len(), Rc::new(entries))
    }

    /// Multi-head scaled dot-product self-attention over consecutive row
    /// groups of length `seq_len`. `qkv` is `[groups * seq_len, 3 * width]`
    /// laid out as `[Q | K | V]`; the result is `[groups * seq_len, width]`.
    ///
    /// With a bias, group `g` adds `scale * keys[g, j]` to the logit of every
    /// query against key `j` before the softmax.
    pub fn attention(&mut self, qkv: Var, seq_len: usize, heads: usize, bias: Option<AttentionBias<T>>) -> Result<Var> {
        let (rows, cols) = self.shape(qkv);
        if cols % 3 != 0 || rows % seq_len != 0 || (cols / 3) % heads != 0 {
            return Err(Error::Shape(format!(
                "attention input [{rows}, {cols}] incompatible with seq_len {seq_len}, heads {heads}"
            )));
        }
        let width = cols / 3;
        let groups = rows / seq_len;
        let dh = width / heads;
        let bias = match bias {
            Some(b) => {
                if b.keys.dim() != (groups, seq_len) {
                    return Err(Error::Shape(format!(
                        "attention bias is {:?}, expected [{groups}, {seq_len}]",
                        b.keys.dim()
                    )));
                }
                Some((b.keys, b.scale))
            }
            None => None,
        };
        let scale = T::one() / T::of(dh as f64).sqrt();
        let qkv_v = self.value(qkv);
        let mut out = Array2::zeros((rows, width));
        let mut probs = Vec::with_capacity(groups * heads);
        for g in 0..groups {
            let r = g * seq_len..(g + 1) * seq_len;
            for h in 0..heads {
                let q = qkv_v.slice(s![r.clone(), h * dh..(h + 1) * dh]);
                let k = qkv_v.slice(s![r.clone(), width + h * dh..width + (h + 1) * dh]);
                let v = qkv_v.slice(s![r.clone(), 2 * width + h * dh..2 * width + (h + 1) * dh]);
                let mut logits = q.dot(&k.t()) * scale;
                if let Some((keys, lam)) = &bias {
                    let lam = self.nodes[lam.0].value[[0, 0]];
                    let brow = keys.row(g);
                    for mut row in logits.rows_mut() {
                        row.scaled_add(lam, &brow);
                    }
                }
                softmax_rows_inplace(&mut logits);
                out.slice_mut(s![r.clone(), h * dh..(h + 1) * dh])
                    .assign(&logits.dot(&v));
                probs.push(logits);
            }
        }
        Ok(self.push(
            out,
            Op::Attention {
                qkv,
                seq_len,
                heads,
                bias,
                probs,
            },
        ))
    }

    pub fn pick(&mut self, a: Var, row: usize, col: usize) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a)[[row, col]]);
        self.push(v, Op::Pick(a, row, col))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("non-empty")
            .insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    /// Mean softmax cross-entropy over rows of `logits` against class indices.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (rows, k) = self.shape(logits);
        if rows != targets.len() {
            return Err(Error::Shape(format!("{rows} logit rows vs {} targets", targets.len())));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::Shape(format!("target class {t} out of range for {k} logits")));
        }
        let mut probs = self.value(logits).clone();
        softmax_rows_inplace(&mut probs);
        let loss = targets.iter().enumerate().map(|(r, &t)| -probs[[r, t]].ln()).sum::<T>() / T::of(rows as f64);
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Mean absolute difference over all elements.
    pub fn l1_mean(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "l1 operands {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let diff = self.value(a) - self.value(b);
        let n = T::of(diff.len() as f64);
        let v = diff.iter().map(|d| d.abs()).sum::<T>() / n;
        Ok(self.push(Array2::from_elem((1, 1), v), Op::L1Mean(a, b)))
    }

    pub fn weighted_sum(&mut self, terms: &[(Var, T)]) -> Var {
        let mut acc = T::zero();
        for &(v, w) in terms {
            acc += w * self.scalar(v);
        }
        self.push(Array2::from_elem((1, 1), acc), Op::WeightedSum(terms.to_vec()))
    }

    /// Backpropagates from the 1x1 node `loss`.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones(self.nodes[loss.0].value.dim()));
        let mut out = Vec::new();

        fn acc<T: Scalar>(grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => match out.iter_mut().find(|(p, _): &&mut (ParamId, Array2<T>)| p == id) {
                    Some((_, existing)) => *existing += &g,
                    None => out.push((*id, g)),
                },
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::AddRow(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *b, gb);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.mapv(|x| x * *s)),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(*a)).for_each(|gv, &x| {
                        if x <= T::zero() {
                            *gv = T::zero();
                        }
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Gelu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(*a))
                        .for_each(|gv, &x| *gv *= gelu_parts(x).1);
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let ggamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let gxhat = &g * self.value(*gamma);
                    let n = T::of(xhat.ncols() as f64);
                    let mut gx = Array2::zeros(xhat.dim());
                    for r in 0..xhat.nrows() {
                        let gr = gxhat.row(r);
                        let xr = xhat.row(r);
                        let mean_g = gr.sum() / n;
                        let mean_gx = gr.iter().zip(xr.iter()).map(|(&a, &b)| a * b).sum::<T>() / n;
                        for c in 0..xhat.ncols() {
                            gx[[r, c]] = inv_std[r] * (gr[c] - mean_g - xr[c] * mean_gx);
                        }
                    }
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *gamma, ggamma);
                    acc(&mut grads, *beta, gbeta);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(p).nrows();
                        acc(&mut grads, p, g.slice(s![start..start + h, ..]).to_owned());
                        start += h;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    ga.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::RowCombine { x, entries } => {
                    let mut gx = Array2::zeros(self.value(*x).dim());
                    for &(o, i, w) in entries.iter() {
                        gx.row_mut(i).scaled_add(w, &g.row(o));
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Attention {
                    qkv,
                    seq_len,
                    heads,
                    bias,
                    probs,
                } => {
                    let qkv_v = self.value(*qkv);
                    let width = qkv_v.ncols() / 3;
                    let dh = width / heads;
                    let groups = qkv_v.nrows() / seq_len;
                    let scale = T::one() / T::of(dh as f64).sqrt();
                    let mut gqkv = Array2::zeros(qkv_v.dim());
                    let mut glam = T::zero();
                    for gi in 0..groups {
                        let r = gi * seq_len..(gi + 1) * seq_len;
                        for h in 0..*heads {
                            let p = &probs[gi * heads + h];
                            let qc = h * dh..(h + 1) * dh;
                            let kc = width + h * dh..width + (h + 1) * dh;
                            let vc = 2 * width + h * dh..2 * width + (h + 1) * dh;
                            let q = qkv_v.slice(s![r.clone(), qc.clone()]);
                            let k = qkv_v.slice(s![r.clone(), kc.clone()]);
                            let v = qkv_v.slice(s![r.clone(), vc.clone()]);
                            let go = g.slice(s![r.clone(), qc.clone()]);
                            let gp = go.dot(&v.t());
                            let gv = p.t().dot(&go);
                            // softmax backward
                            let mut gs = gp;
                            for (mut gs_row, p_row) in gs.rows_mut().into_iter().zip(p.rows()) {
                                let dot = gs_row.iter().zip(p_row.iter()).map(|(&a, &b)| a * b).sum::<T>();
                                Zip::from(&mut gs_row).and(&p_row).for_each(|a, &b| *a = b * (*a - dot));
                            }
                            if let Some((keys, _)) = bias {
                                let brow = keys.row(gi);
                                for gs_row in gs.rows() {
                                    glam += gs_row.iter().zip(brow.iter()).map(|(&a, &b)| a * b).sum::<T>();
                                }
                            }
                            let gq = gs.dot(&k) * scale;
                            let gk = gs.t().dot(&q) * scale;
                            gqkv.slice_mut(s![r.clone(), qc]).assign(&gq);
                            gqkv.slice_mut(s![r.clone(), kc]).assign(&gk);
                            gqkv.slice_mut(s![r.clone(), vc]).assign(&gv);
                        }
                    }
                    acc(&mut grads, *qkv, gqkv);
                    if let Some((_, lam)) = bias {
                        acc(&mut grads, *lam, Array2::from_elem((1, 1), glam));
                    }
                }
                Op::Pick(a, r, c) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    ga[[*r, *c]] = g[[0, 0]];
                    acc(&mut grads, *a, ga);
                }
                Op::MeanRows(a) => {
                    let (rows, cols) = self.value(*a).dim();
                    let inv = T::one() / T::of(rows as f64);
                    let row = g.row(0).mapv(|x| x * inv);
                    let ga = row.broadcast((rows, cols)).expect("broadcast").to_owned();
                    acc(&mut grads, *a, ga);
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let rows = T::of(targets.len() as f64);
                    let mut gl = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        gl[[r, t]] -= T::one();
                    }
                    let s = g[[0, 0]] / rows;
                    acc(&mut grads, *logits, gl.mapv(|x| x * s));
                }
                Op::L1Mean(a, b) => {
                    let diff = self.value(*a) - self.value(*b);
                    let s = g[[0, 0]] / T::of(diff.len() as f64);
                    let ga = diff.mapv(|d| {
                        if d > T::zero() {
                            s
                        } else if d < T::zero() {
                            -s
                        } else {
                            T::zero()
                        }
                    });
                    let gb = ga.mapv(|x| -x);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::WeightedSum(terms) => {
                    for &(v, w) in terms {
                        acc(&mut grads, v, Array2::from_elem((1, 1), g[[0, 0]] * w));
                    }
                }
            }
        }
        Gradients { entries: out }
    }
}
