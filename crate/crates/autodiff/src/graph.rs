//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s in creation
//! order, so a reverse sweep over the node list is a valid topological order
//! for backpropagation. Parameter leaves borrow their values from a
//! [`ParamStore`] instead of copying them. A graph supports exactly one
//! [`Graph::backward`] call, after which its intermediate buffers are freed.

use rand::Rng;

use crate::error::{shape_err, AutodiffError, Result};
use crate::ops::attention::{self, AttnCache, AttnGeom};
use crate::ops::conv::{self, ConvGeom};
use crate::ops::lstm::{self, LstmCache, LstmGeom};
use crate::ops::norm::{self, NormCache};
use crate::ops::pool::{self, PoolGeom};
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Running statistics of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormState {
    pub fn new(features: usize, momentum: f64, eps: f64) -> Self {
        Self {
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum,
            eps,
        }
    }
}

enum NodeValue {
    Owned(Tensor),
    Param(ParamId),
}

enum Op {
    Leaf,
    Conv {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        cache: NormCache,
    },
    Relu {
        x: Var,
    },
    Reshape {
        x: Var,
    },
    Concat {
        parts: Vec<Var>,
    },
    Dense {
        x: Var,
        w: Var,
        b: Var,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Lstm {
        x: Var,
        wx: Var,
        wh: Var,
        b: Var,
        geom: LstmGeom,
        cache: LstmCache,
    },
    Attention {
        h: Var,
        w: Var,
        b: Var,
        v: Var,
        geom: AttnGeom,
        cache: AttnCache,
    },
    Softmax {
        x: Var,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum {
        x: Var,
    },
    WeightedSum {
        x: Var,
        weights: Vec<f64>,
    },
}

struct Node {
    value: NodeValue,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients {
    node_grads: Vec<Option<Vec<f64>>>,
    param_grads: Vec<(ParamId, Vec<f64>)>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` required one.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.node_grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn params(&self) -> &[(ParamId, Vec<f64>)] {
        &self.param_grads
    }

    /// Adds every parameter gradient into the store.
    pub fn apply_to(&self, store: &mut ParamStore) {
        for (id, g) in &self.param_grads {
            store.accumulate_grad(*id, g);
        }
    }
}

fn softmax_rows(x: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, orow) in x.chunks_exact(k).zip(out.chunks_exact_mut(k)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, &v) in orow.iter_mut().zip(row) {
            *o = (v - max).exp();
            total += *o;
        }
        orow.iter_mut().for_each(|o| *o /= total);
    }
    out
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Self {
            params: None,
            nodes: Vec::new(),
            consumed: false,
        }
    }

    /// A graph whose parameter leaves read from `params`.
    pub fn with_params(params: &'p ParamStore) -> Self {
        Self {
            params: Some(params),
            nodes: Vec::new(),
            consumed: false,
        }
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: NodeValue::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn check_live(&self) -> Result<()> {
        if self.consumed {
            Err(AutodiffError::GraphReused)
        } else {
            Ok(())
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Constant input; no gradient is tracked.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Free leaf whose gradient is reported through [`Gradients::wrt`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        let store = self
            .params
            .ok_or_else(|| AutodiffError::BadSpec("graph has no parameter store".into()))?;
        if id.0 >= store.len() {
            return Err(AutodiffError::UnknownParameter(format!("#{}", id.0)));
        }
        self.nodes.push(Node {
            value: NodeValue::Param(id),
            op: Op::Leaf,
            needs_grad: true,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            NodeValue::Owned(t) => t,
            NodeValue::Param(id) => &self.params.expect("param node without store").get(*id).tensor,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// "Same" cross-correlation; see [`crate::ops::conv`].
    pub fn conv3d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let geom = ConvGeom::infer(self.shape(x), self.shape(w), self.shape(b))?;
        let out = conv::forward(&geom, self.value(x).data(), self.value(w).data(), self.value(b).data());
        let t = Tensor::new(&geom.output_shape(), out)?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(t, Op::Conv { x, w, b, geom }, ng))
    }

    /// Parallel convolutions sharing one input, concatenated along the
    /// feature axis in branch order. All branches must have the same width.
    pub fn multiscale_conv3d(&mut self, x: Var, branches: &[(Var, Var)]) -> Result<Var> {
        let widths: Vec<usize> = branches.iter().map(|&(w, _)| self.value(w).last_dim()).collect();
        if widths.is_empty() || widths.iter().any(|&w| w != widths[0]) {
            return Err(shape_err("multiscale_conv3d", format!("branch widths {widths:?}")));
        }
        let outs = branches
            .iter()
            .map(|&(w, b)| self.conv3d(x, w, b))
            .collect::<Result<Vec<_>>>()?;
        self.concat(&outs)
    }

    pub fn maxpool3d(&mut self, x: Var, pool: [usize; 3]) -> Result<Var> {
        self.check_live()?;
        let geom = PoolGeom::infer(self.shape(x), pool)?;
        let (out, argmax) = pool::forward(&geom, self.value(x).data());
        let t = Tensor::new(&geom.output_shape(), out)?;
        let ng = self.needs(x);
        Ok(self.push(t, Op::MaxPool { x, argmax }, ng))
    }

    /// Batch norm over the last axis. Train mode normalizes with batch
    /// statistics and folds them into `state`; infer mode uses `state`.
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, state: &mut BatchNormState, mode: Mode) -> Result<Var> {
        self.check_live()?;
        let features = self.value(x).last_dim();
        if self.shape(x).is_empty()
            || self.value(gamma).len() != features
            || self.value(beta).len() != features
            || state.running_mean.len() != features
        {
            return Err(shape_err(
                "batch_norm",
                format!(
                    "input {:?} with {} gamma values",
                    self.shape(x),
                    self.value(gamma).len()
                ),
            ));
        }
        let xv = self.value(x).data();
        let (g, bt) = (self.value(gamma).data(), self.value(beta).data());
        let (out, cache) = match mode {
            Mode::Train => {
                let count = xv.len() / features;
                if count < 2 {
                    return Err(AutodiffError::DegenerateBatch(count));
                }
                let (mean, var) = norm::moments(xv, features);
                let res = norm::normalize(xv, &mean, &var, state.eps, g, bt, true);
                let m = state.momentum;
                for j in 0..features {
                    state.running_mean[j] = m * state.running_mean[j] + (1.0 - m) * mean[j];
                    state.running_var[j] = m * state.running_var[j] + (1.0 - m) * var[j];
                }
                res
            }
            Mode::Infer => norm::normalize(xv, &state.running_mean, &state.running_var, state.eps, g, bt, false),
        };
        let t = Tensor::new(self.shape(x), out)?;
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(t, Op::BatchNorm { x, gamma, beta, cache }, ng))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let xv = self.value(x);
        let t = Tensor::new(xv.shape(), xv.data().iter().map(|v| v.max(0.0)).collect())?;
        let ng = self.needs(x);
        Ok(self.push(t, Op::Relu { x }, ng))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        self.check_live()?;
        let t = self.value(x).clone().reshaped(shape)?;
        let ng = self.needs(x);
        Ok(self.push(t, Op::Reshape { x }, ng))
    }

    /// Row-major flatten to `(B, rest)`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x);
        let b = *shape.first().ok_or_else(|| shape_err("flatten", "scalar input"))?;
        let rest = shape[1..].iter().product::<usize>();
        self.reshape(x, &[b, rest])
    }

    /// Concatenation along the last axis, in argument order.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        self.check_live()?;
        let first = parts.first().ok_or_else(|| shape_err("concat", "no inputs"))?;
        let lead = self.shape(*first)[..self.shape(*first).len() - 1].to_vec();
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(shape_err("concat", format!("{:?} vs leading {lead:?}", s)));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let t = Tensor::new(&shape, out)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(t, Op::Concat { parts: parts.to_vec() }, ng))
    }

    /// `x (B, F) · w (F, K) + b (K)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || ws[1] != bs[0] {
            return Err(shape_err("dense", format!("x {xs:?}, w {ws:?}, b {bs:?}")));
        }
        let (rows, k) = (xs[0], ws[1]);
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = Vec::with_capacity(rows * k);
        for xr in xv.chunks_exact(ws[0]) {
            let mut o = bv.to_vec();
            for (f, &a) in xr.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (ov, &wv) in o.iter_mut().zip(&wv[f * k..(f + 1) * k]) {
                    *ov += a * wv;
                }
            }
            out.extend_from_slice(&o);
        }
        let t = Tensor::new(&[rows, k], out)?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(t, Op::Dense { x, w, b }, ng))
    }

    /// Inverted dropout. Identity in infer mode or when `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::BadSpec(format!("dropout p = {p} outside [0, 1)")));
        }
        let n = self.value(x).len();
        let mask = if mode == Mode::Infer || p == 0.0 {
            vec![1.0; n]
        } else {
            let keep = 1.0 / (1.0 - p);
            (0..n)
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                .collect()
        };
        self.dropout_with_mask(x, mask)
    }

    /// Multiplies by a fixed, already scaled mask.
    pub fn dropout_with_mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        self.check_live()?;
        let xv = self.value(x);
        if mask.len() != xv.len() {
            return Err(shape_err(
                "dropout",
                format!("mask {} for {} values", mask.len(), xv.len()),
            ));
        }
        let t = Tensor::new(xv.shape(), xv.data().iter().zip(&mask).map(|(a, m)| a * m).collect())?;
        let ng = self.needs(x);
        Ok(self.push(t, Op::Dropout { x, mask }, ng))
    }

    /// LSTM over `(B, T, F)`, returning all hidden states `(B, T, H)`.
    pub fn lstm(&mut self, x: Var, wx: Var, wh: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let (xs, wxs, whs, bs) = (self.shape(x), self.shape(wx), self.shape(wh), self.shape(b));
        let bad = xs.len() != 3
            || wxs.len() != 2
            || whs.len() != 2
            || bs.len() != 1
            || wxs[0] != xs[2]
            || wxs[1] % 4 != 0
            || whs[0] * 4 != wxs[1]
            || whs[1] != wxs[1]
            || bs[0] != wxs[1];
        if bad {
            return Err(shape_err("lstm", format!("x {xs:?}, wx {wxs:?}, wh {whs:?}, b {bs:?}")));
        }
        let geom = LstmGeom {
            batch: xs[0],
            steps: xs[1],
            features: xs[2],
            units: whs[0],
        };
        let (out, cache) = lstm::forward(
            &geom,
            self.value(x).data(),
            self.value(wx).data(),
            self.value(wh).data(),
            self.value(b).data(),
        );
        let t = Tensor::new(&[geom.batch, geom.steps, geom.units], out)?;
        let ng = [x, wx, wh, b].iter().any(|&v| self.needs(v));
        Ok(self.push(
            t,
            Op::Lstm {
                x,
                wx,
                wh,
                b,
                geom,
                cache,
            },
            ng,
        ))
    }

    /// Additive attention pooling `(B, T, H) -> (B, H)`.
    pub fn attention_pool(&mut self, h: Var, w: Var, b: Var, v: Var) -> Result<Var> {
        self.check_live()?;
        let (hs, ws, bs, vs) = (self.shape(h), self.shape(w), self.shape(b), self.shape(v));
        if hs.len() != 3 || ws.len() != 2 || ws[0] != hs[2] || bs != [ws[1]] || vs != [ws[1]] || hs[1] == 0 {
            return Err(shape_err(
                "attention_pool",
                format!("h {hs:?}, w {ws:?}, b {bs:?}, v {vs:?}"),
            ));
        }
        let geom = AttnGeom {
            batch: hs[0],
            steps: hs[1],
            hidden: hs[2],
            attn: ws[1],
        };
        let (out, cache) = attention::forward(
            &geom,
            self.value(h).data(),
            self.value(w).data(),
            self.value(b).data(),
            self.value(v).data(),
        );
        let t = Tensor::new(&[geom.batch, geom.hidden], out)?;
        let ng = [h, w, b, v].iter().any(|&x| self.needs(x));
        Ok(self.push(
            t,
            Op::Attention {
                h,
                w,
                b,
                v,
                geom,
                cache,
            },
            ng,
        ))
    }

    /// Attention weights `(B, T)` of an attention node, for inspection.
    pub fn attention_weights(&self, v: Var) -> Option<&[f64]> {
        match &self.nodes.get(v.0)?.op {
            Op::Attention { cache, .. } => Some(&cache.alpha),
            _ => None,
        }
    }

    /// Softmax along the last axis, max-subtracted.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let xv = self.value(x);
        let k = xv.last_dim();
        let t = Tensor::new(xv.shape(), softmax_rows(xv.data(), k))?;
        let ng = self.needs(x);
        Ok(self.push(t, Op::Softmax { x }, ng))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        self.check_live()?;
        let lv = self.value(logits);
        let s = lv.shape();
        if s.len() != 2 || s[0] != labels.len() || s[0] == 0 {
            return Err(shape_err(
                "cross_entropy",
                format!("logits {s:?} with {} labels", labels.len()),
            ));
        }
        let k = s[1];
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(AutodiffError::LabelOutOfRange { label, classes: k });
        }
        let mut loss = 0.0;
        for (row, &y) in lv.data().chunks_exact(k).zip(labels) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
        }
        loss /= labels.len() as f64;
        let probs = softmax_rows(lv.data(), k);
        let ng = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            ng,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let s = self.value(x).data().iter().sum();
        let ng = self.needs(x);
        Ok(self.push(Tensor::scalar(s), Op::Sum { x }, ng))
    }

    /// `Σ x_i w_i` for a constant weight vector; handy for probing gradients.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<f64>) -> Result<Var> {
        self.check_live()?;
        let xv = self.value(x).data();
        if weights.len() != xv.len() {
            return Err(shape_err(
                "weighted_sum",
                format!("{} weights for {} values", weights.len(), xv.len()),
            ));
        }
        let s = xv.iter().zip(&weights).map(|(a, b)| a * b).sum();
        let ng = self.needs(x);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, weights }, ng))
    }

    /// Backpropagates from a scalar `loss`. Consumes the graph's buffers.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        self.check_live()?;
        let ls = self.shape(loss);
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NotScalar(ls.to_vec()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        let mut param_grads = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            if matches!(op, Op::Leaf) {
                if let NodeValue::Param(id) = self.nodes[i].value {
                    param_grads.push((id, g.clone()));
                }
                // leaf gradients stay queryable
                grads[i] = Some(g);
            } else {
                self.backprop_node(i, &op, &g, &mut grads);
            }
        }
        param_grads.sort_by_key(|(id, _)| *id);
        self.consumed = true;
        for node in &mut self.nodes {
            node.op = Op::Leaf;
            if let NodeValue::Owned(t) = &mut node.value {
                *t = Tensor::zeros(&[0]);
            }
        }
        Ok(Gradients {
            node_grads: grads,
            param_grads,
        })
    }

    fn backprop_node(&self, i: usize, op: &Op, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let needs = |v: Var| self.nodes[v.0].needs_grad;
        let mut acc = |v: Var, contrib: Vec<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(e) => e.iter_mut().zip(&contrib).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(contrib),
            }
        };
        match op {
            Op::Leaf => {}
            Op::Conv { x, w, b, geom } => {
                let (dx, dw, db) = conv::backward(geom, self.value(*x).data(), self.value(*w).data(), g, needs(*x));
                if let Some(dx) = dx {
                    acc(*x, dx);
                }
                acc(*w, dw);
                acc(*b, db);
            }
            Op::MaxPool { x, argmax } => {
                acc(*x, pool::backward(self.value(*x).len(), argmax, g));
            }
            Op::BatchNorm { x, gamma, beta, cache } => {
                let (dx, dg, db) = norm::backward(cache, self.value(*gamma).data(), g);
                acc(*x, dx);
                acc(*gamma, dg);
                acc(*beta, db);
            }
            Op::Relu { x } => {
                let dx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                    .collect();
                acc(*x, dx);
            }
            Op::Reshape { x } => acc(*x, g.to_vec()),
            Op::Concat { parts } => {
                let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).last_dim()).collect();
                let total: usize = widths.iter().sum();
                let rows = g.len() / total;
                let mut offset = 0;
                for (&p, &w) in parts.iter().zip(&widths) {
                    let mut d = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        d.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                    }
                    acc(p, d);
                    offset += w;
                }
            }
            Op::Dense { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                let (f, k) = (wv.shape()[0], wv.shape()[1]);
                let mut db = vec![0.0; k];
                let mut dw = vec![0.0; f * k];
                let mut dx = vec![0.0; xv.len()];
                for (r, gr) in g.chunks_exact(k).enumerate() {
                    db.iter_mut().zip(gr).for_each(|(a, b)| *a += b);
                    let xr = &xv.data()[r * f..(r + 1) * f];
                    for i in 0..f {
                        let wrow = &wv.data()[i * k..(i + 1) * k];
                        dx[r * f + i] = wrow.iter().zip(gr).map(|(a, b)| a * b).sum();
                        if xr[i] != 0.0 {
                            for (d, &gv) in dw[i * k..(i + 1) * k].iter_mut().zip(gr) {
                                *d += xr[i] * gv;
                            }
                        }
                    }
                }
                acc(*x, dx);
                acc(*w, dw);
                acc(*b, db);
            }
            Op::Dropout { x, mask } => {
                acc(*x, g.iter().zip(mask).map(|(a, m)| a * m).collect());
            }
            Op::Lstm {
                x,
                wx,
                wh,
                b,
                geom,
                cache,
            } => {
                let hs = self.value(Var(i)).data();
                let grads_l = lstm::backward(
                    geom,
                    cache,
                    hs,
                    self.value(*x).data(),
                    self.value(*wx).data(),
                    self.value(*wh).data(),
                    g,
                    needs(*x),
                );
                if let Some(dx) = grads_l.dx {
                    acc(*x, dx);
                }
                acc(*wx, grads_l.dwx);
                acc(*wh, grads_l.dwh);
                acc(*b, grads_l.db);
            }
            Op::Attention {
                h,
                w,
                b,
                v,
                geom,
                cache,
            } => {
                let ag = attention::backward(
                    geom,
                    cache,
                    self.value(*h).data(),
                    self.value(*w).data(),
                    self.value(*v).data(),
                    g,
                );
                acc(*h, ag.dh);
                acc(*w, ag.dw);
                acc(*b, ag.db);
                acc(*v, ag.dv);
            }
            Op::Softmax { x } => {
                let s = self.value(Var(i)).data();
                let k = self.value(*x).last_dim();
                let mut dx = vec![0.0; s.len()];
                for ((sr, gr), dr) in s.chunks_exact(k).zip(g.chunks_exact(k)).zip(dx.chunks_exact_mut(k)) {
                    let dot: f64 = sr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..k {
                        dr[j] = sr[j] * (gr[j] - dot);
                    }
                }
                acc(*x, dx);
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let k = self.value(*logits).last_dim();
                let scale = g[0] / labels.len() as f64;
                let mut d = probs.clone();
                for (r, &y) in labels.iter().enumerate() {
                    d[r * k + y] -= 1.0;
                }
                d.iter_mut().for_each(|v| *v *= scale);
                acc(*logits, d);
            }
            Op::Sum { x } => acc(*x, vec![g[0]; self.value(*x).len()]),
            Op::WeightedSum { x, weights } => {
                acc(*x, weights.iter().map(|w| w * g[0]).collect());
            }
        }
    }
}
