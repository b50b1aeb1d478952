//! Tape of eagerly evaluated nodes with reverse-mode gradients.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is
//! a valid reverse topological order.

use super::kernels::{self, ConvDims};
use super::{Tensor, TensorError};
use crate::layout::Rotation;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` inside logs.
pub const PROB_FLOOR: f64 = 1e-7;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

/// The fixed layer zoo.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// 3x3, zero padding 1, stride 1 or 2. Params: weight `[co, ci, 3, 3]`, bias `[co]`.
    Conv2d {
        stride: usize,
    },
    /// 4x4, stride 2, padding 1. Params: weight `[ci, co, 4, 4]`, bias `[co]`.
    TransposedConv2d,
    LeakyRelu,
    Relu,
    Sigmoid,
    SoftmaxChannelwise,
    ConcatChannels,
    GlobalMean,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::TransposedConv2d => "transposed_conv2d",
            LayerKind::LeakyRelu => "leaky_relu",
            LayerKind::Relu => "relu",
            LayerKind::Sigmoid => "sigmoid",
            LayerKind::SoftmaxChannelwise => "softmax_channelwise",
            LayerKind::ConcatChannels => "concat_channels",
            LayerKind::GlobalMean => "global_mean",
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv2d { x: NodeId, w: NodeId, b: NodeId, dims: DimsKey },
    TransposedConv2d { x: NodeId, w: NodeId, b: NodeId, dims: DimsKey },
    LeakyRelu(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Concat(Vec<NodeId>),
    GlobalMean(NodeId),
    QuarterTurn { x: NodeId, turns: Vec<Rotation> },
    MulMask { x: NodeId, mask: NodeId },
    Complement { x: NodeId, channel: usize },
    CrossEntropy { pred: NodeId, target: Vec<f64>, weight: Vec<f64>, norm: f64 },
    Bce { p: NodeId, label: f64 },
    Dot { x: NodeId, weights: Vec<f64> },
    Combine(Vec<(NodeId, f64)>),
}

#[derive(Clone, Copy, Debug)]
struct DimsKey {
    n: usize,
    ci: usize,
    h: usize,
    w: usize,
    co: usize,
    oh: usize,
    ow: usize,
    stride: usize,
}

impl DimsKey {
    fn conv(&self) -> ConvDims {
        ConvDims { n: self.n, ci: self.ci, h: self.h, w: self.w, co: self.co, oh: self.oh, ow: self.ow, stride: self.stride }
    }
}

struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Records a forward computation for one backward pass.
pub struct Graph {
    nodes: Vec<Node>,
    kink_margin: f64,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(layer: &'static str, detail: String) -> TensorError {
    TensorError::Shape { layer, detail }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), kink_margin: f64::INFINITY }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest `|x|` seen at a relu/leaky-relu input so far.
    pub fn kink_margin(&self) -> f64 {
        self.kink_margin
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool, op: Op) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, grad: None, requires_grad, op });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.node(*i).requires_grad)
    }

    /// Adds a tensor to the tape; `requires_grad` marks it as a leaf whose
    /// gradient backward should fill.
    pub fn input(&mut self, t: &Tensor, requires_grad: bool) -> NodeId {
        self.push(t.shape().to_vec(), t.data().to_vec(), requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<NodeId, TensorError> {
        let t = Tensor::from_vec(shape, data)?;
        Ok(self.push(t.shape().to_vec(), t.into_data(), false, Op::Leaf))
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.node(id).value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.node(id).shape
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.node(id).value[0]
    }

    pub fn to_tensor(&self, id: NodeId) -> Tensor {
        let n = self.node(id);
        Tensor::from_vec(&n.shape, n.value.clone()).expect("node shape matches its data")
    }

    /// Gradient of the last backward pass, if this node received one.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.node(id).grad.as_deref()
    }

    fn nchw(&self, id: NodeId, layer: &'static str) -> Result<[usize; 4], TensorError> {
        match self.shape(id) {
            &[n, c, h, w] => Ok([n, c, h, w]),
            s => Err(shape_err(layer, format!("expected NCHW input, got {s:?}"))),
        }
    }

    /// Dispatches one layer of the zoo.
    pub fn layer(&mut self, kind: LayerKind, inputs: &[NodeId], params: &[NodeId]) -> Result<NodeId, TensorError> {
        let one = |v: &[NodeId], what: &str| -> Result<NodeId, TensorError> {
            match v {
                [x] => Ok(*x),
                _ => Err(shape_err(kind.name(), format!("expected exactly one {what}, got {}", v.len()))),
            }
        };
        let no_params = || -> Result<(), TensorError> {
            if params.is_empty() {
                Ok(())
            } else {
                Err(shape_err(kind.name(), "takes no parameters".into()))
            }
        };
        match kind {
            LayerKind::Conv2d { stride } => match params {
                [w, b] => self.conv2d(one(inputs, "input")?, *w, *b, stride),
                _ => Err(shape_err("conv2d", "expected weight and bias".into())),
            },
            LayerKind::TransposedConv2d => match params {
                [w, b] => self.transposed_conv2d(one(inputs, "input")?, *w, *b),
                _ => Err(shape_err("transposed_conv2d", "expected weight and bias".into())),
            },
            LayerKind::LeakyRelu => {
                no_params()?;
                Ok(self.leaky_relu(one(inputs, "input")?))
            }
            LayerKind::Relu => {
                no_params()?;
                Ok(self.relu(one(inputs, "input")?))
            }
            LayerKind::Sigmoid => {
                no_params()?;
                Ok(self.sigmoid(one(inputs, "input")?))
            }
            LayerKind::SoftmaxChannelwise => {
                no_params()?;
                self.softmax_channels(one(inputs, "input")?)
            }
            LayerKind::ConcatChannels => {
                no_params()?;
                self.concat_channels(inputs)
            }
            LayerKind::GlobalMean => {
                no_params()?;
                self.global_mean(one(inputs, "input")?)
            }
        }
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize) -> Result<NodeId, TensorError> {
        let [n, ci, h, wd] = self.nchw(x, "conv2d")?;
        if stride != 1 && stride != 2 {
            return Err(shape_err("conv2d", format!("stride must be 1 or 2, got {stride}")));
        }
        let co = match self.shape(w) {
            &[co, wci, 3, 3] if wci == ci => co,
            s => return Err(shape_err("conv2d", format!("weight {s:?} does not fit input {:?}", [n, ci, h, wd]))),
        };
        if self.shape(b) != [co] {
            return Err(shape_err("conv2d", format!("bias {:?} should be [{co}]", self.shape(b))));
        }
        let dims = DimsKey { n, ci, h, w: wd, co, oh: (h - 1) / stride + 1, ow: (wd - 1) / stride + 1, stride };
        let out = kernels::conv2d_forward(self.value(x), self.value(w), self.value(b), &dims.conv());
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(vec![n, co, dims.oh, dims.ow], out, rg, Op::Conv2d { x, w, b, dims }))
    }

    pub fn transposed_conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let [n, ci, h, wd] = self.nchw(x, "transposed_conv2d")?;
        let co = match self.shape(w) {
            &[wci, co, 4, 4] if wci == ci => co,
            s => return Err(shape_err("transposed_conv2d", format!("weight {s:?} does not fit input {:?}", [n, ci, h, wd]))),
        };
        if self.shape(b) != [co] {
            return Err(shape_err("transposed_conv2d", format!("bias {:?} should be [{co}]", self.shape(b))));
        }
        let dims = DimsKey { n, ci, h, w: wd, co, oh: 2 * h, ow: 2 * wd, stride: 2 };
        let out = kernels::tconv_forward(self.value(x), self.value(w), self.value(b), &dims.conv());
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(vec![n, co, dims.oh, dims.ow], out, rg, Op::TransposedConv2d { x, w, b, dims }))
    }

    fn track_kinks(&mut self, x: NodeId) {
        let m = self.value(x).iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        self.kink_margin = self.kink_margin.min(m);
    }

    pub fn leaky_relu(&mut self, x: NodeId) -> NodeId {
        self.track_kinks(x);
        let out = self.value(x).iter().map(|v| if *v > 0.0 { *v } else { LEAKY_SLOPE * v }).collect();
        let n = self.node(x);
        let (shape, rg) = (n.shape.clone(), n.requires_grad);
        self.push(shape, out, rg, Op::LeakyRelu(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.track_kinks(x);
        let out = self.value(x).iter().map(|v| v.max(0.0)).collect();
        let n = self.node(x);
        let (shape, rg) = (n.shape.clone(), n.requires_grad);
        self.push(shape, out, rg, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        let n = self.node(x);
        let (shape, rg) = (n.shape.clone(), n.requires_grad);
        self.push(shape, out, rg, Op::Sigmoid(x))
    }

    /// Softmax across the channel axis at every pixel.
    pub fn softmax_channels(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let [n, c, h, w] = self.nchw(x, "softmax_channelwise")?;
        let p = h * w;
        let xv = self.value(x);
        let mut out = vec![0.0; xv.len()];
        for b in 0..n {
            let base = b * c * p;
            for i in 0..p {
                let mut m = f64::NEG_INFINITY;
                for ch in 0..c {
                    m = m.max(xv[base + ch * p + i]);
                }
                let mut z = 0.0;
                for ch in 0..c {
                    let e = (xv[base + ch * p + i] - m).exp();
                    out[base + ch * p + i] = e;
                    z += e;
                }
                for ch in 0..c {
                    out[base + ch * p + i] /= z;
                }
            }
        }
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![n, c, h, w], out, rg, Op::Softmax(x)))
    }

    pub fn concat_channels(&mut self, xs: &[NodeId]) -> Result<NodeId, TensorError> {
        let first = *xs.first().ok_or_else(|| shape_err("concat_channels", "no inputs".into()))?;
        let [n, _, h, w] = self.nchw(first, "concat_channels")?;
        let mut total = 0;
        for x in xs {
            let [xn, xc, xh, xw] = self.nchw(*x, "concat_channels")?;
            if (xn, xh, xw) != (n, h, w) {
                return Err(shape_err("concat_channels", format!("input {:?} does not match {:?}", self.shape(*x), self.shape(first))));
            }
            total += xc;
        }
        let p = h * w;
        let mut out = Vec::with_capacity(n * total * p);
        for b in 0..n {
            for x in xs {
                let c = self.shape(*x)[1];
                out.extend_from_slice(&self.value(*x)[b * c * p..(b + 1) * c * p]);
            }
        }
        let rg = self.needs(xs);
        Ok(self.push(vec![n, total, h, w], out, rg, Op::Concat(xs.to_vec())))
    }

    /// Mean over the spatial axes: `[n, c, h, w] -> [n, c]`.
    pub fn global_mean(&mut self, x: NodeId) -> Result<NodeId, TensorError> {
        let [n, c, h, w] = self.nchw(x, "global_mean")?;
        let p = h * w;
        let out = self.value(x).chunks_exact(p).map(|pl| pl.iter().sum::<f64>() / p as f64).collect();
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![n, c], out, rg, Op::GlobalMean(x)))
    }

    /// Exact spatial quarter turn of every channel; sample `i` turns by `turns[i]`.
    pub fn quarter_turn(&mut self, x: NodeId, turns: &[Rotation]) -> Result<NodeId, TensorError> {
        let [n, c, h, w] = self.nchw(x, "rotation_filter")?;
        if h != w {
            return Err(shape_err("rotation_filter", format!("feature map {h}x{w} is not square")));
        }
        if turns.len() != n {
            return Err(shape_err("rotation_filter", format!("{} turns for batch of {n}", turns.len())));
        }
        let per = c * h * w;
        let xv = self.value(x);
        let mut out = Vec::with_capacity(xv.len());
        for (b, k) in turns.iter().enumerate() {
            out.extend(kernels::quarter_turn_planes(&xv[b * per..(b + 1) * per], h, *k));
        }
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![n, c, h, w], out, rg, Op::QuarterTurn { x, turns: turns.to_vec() }))
    }

    /// Multiplies every channel by a one-channel mask `[n, 1, h, w]`.
    pub fn mul_mask(&mut self, x: NodeId, mask: NodeId) -> Result<NodeId, TensorError> {
        let [n, c, h, w] = self.nchw(x, "apply_mask")?;
        if self.shape(mask) != [n, 1, h, w] {
            return Err(shape_err("apply_mask", format!("mask {:?} does not fit {:?}", self.shape(mask), [n, c, h, w])));
        }
        let p = h * w;
        let (xv, mv) = (self.value(x), self.value(mask));
        let mut out = vec![0.0; xv.len()];
        for b in 0..n {
            for ch in 0..c {
                let o = (b * c + ch) * p;
                for i in 0..p {
                    out[o + i] = xv[o + i] * mv[b * p + i];
                }
            }
        }
        let rg = self.needs(&[x, mask]);
        Ok(self.push(vec![n, c, h, w], out, rg, Op::MulMask { x, mask }))
    }

    /// `1 - x[:, channel]` as a one-channel map.
    pub fn complement(&mut self, x: NodeId, channel: usize) -> Result<NodeId, TensorError> {
        let [n, c, h, w] = self.nchw(x, "complement")?;
        if channel >= c {
            return Err(shape_err("complement", format!("channel {channel} of {c}")));
        }
        let p = h * w;
        let xv = self.value(x);
        let mut out = Vec::with_capacity(n * p);
        for b in 0..n {
            let o = (b * c + channel) * p;
            out.extend(xv[o..o + p].iter().map(|v| 1.0 - v));
        }
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![n, 1, h, w], out, rg, Op::Complement { x, channel }))
    }

    /// `-(1/norm) * sum_{n,pixel} weight[n,pixel] * sum_c target * ln(clamp(pred))`.
    ///
    /// `target` has the shape of `pred`; `weight` is `[n, h, w]`.
    pub fn cross_entropy(&mut self, pred: NodeId, target: Vec<f64>, weight: Vec<f64>, norm: f64) -> Result<NodeId, TensorError> {
        let [n, c, h, w] = self.nchw(pred, "cross_entropy")?;
        let p = h * w;
        if target.len() != n * c * p || weight.len() != n * p {
            return Err(shape_err("cross_entropy", "target or weight does not match prediction".into()));
        }
        if !(norm > 0.0) {
            return Err(shape_err("cross_entropy", format!("normalizer must be positive, got {norm}")));
        }
        let pv = self.value(pred);
        let mut s = 0.0;
        for b in 0..n {
            for ch in 0..c {
                let o = (b * c + ch) * p;
                for i in 0..p {
                    let t = target[o + i] * weight[b * p + i];
                    if t != 0.0 {
                        s -= t * pv[o + i].max(PROB_FLOOR).ln();
                    }
                }
            }
        }
        let rg = self.node(pred).requires_grad;
        Ok(self.push(vec![1], vec![s / norm], rg, Op::CrossEntropy { pred, target, weight, norm }))
    }

    /// Batch mean of binary cross-entropy against a fixed label in {0, 1}.
    pub fn bce(&mut self, p: NodeId, label: f64) -> Result<NodeId, TensorError> {
        let pv = self.value(p);
        if pv.is_empty() {
            return Err(shape_err("bce", "empty probability tensor".into()));
        }
        let n = pv.len() as f64;
        let s: f64 = pv
            .iter()
            .map(|v| {
                let q = v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                -(label * q.ln() + (1.0 - label) * (1.0 - q).ln())
            })
            .sum();
        let rg = self.node(p).requires_grad;
        Ok(self.push(vec![1], vec![s / n], rg, Op::Bce { p, label }))
    }

    /// `sum(weights * x)` as a scalar.
    pub fn dot(&mut self, x: NodeId, weights: Vec<f64>) -> Result<NodeId, TensorError> {
        if weights.len() != self.value(x).len() {
            return Err(shape_err("dot", format!("{} weights for {} values", weights.len(), self.value(x).len())));
        }
        let s = self.value(x).iter().zip(&weights).map(|(a, b)| a * b).sum();
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![1], vec![s], rg, Op::Dot { x, weights }))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).len();
        self.dot(x, vec![1.0; n]).expect("weights match by construction")
    }

    /// Weighted sum of scalar nodes.
    pub fn combine(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId, TensorError> {
        let mut s = 0.0;
        for (id, c) in terms {
            if self.value(*id).len() != 1 {
                return Err(shape_err("combine", format!("term {:?} is not a scalar", self.shape(*id))));
            }
            if *c != 0.0 {
                s += c * self.scalar(*id);
            }
        }
        let ids: Vec<NodeId> = terms.iter().map(|t| t.0).collect();
        let rg = self.needs(&ids);
        Ok(self.push(vec![1], vec![s], rg, Op::Combine(terms.to_vec())))
    }

    /// Fills gradients of every node that requires one, seeded from a scalar loss.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TensorError> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else { continue };
            self.propagate(i, &g);
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn take_grad(&mut self, id: NodeId) -> Option<Vec<f64>> {
        let n = &mut self.nodes[id.0];
        if !n.requires_grad {
            return None;
        }
        let len = n.value.len();
        Some(n.grad.take().unwrap_or_else(|| vec![0.0; len]))
    }

    /// Runs `f` with the gradient buffer of `id` (if it wants one) and a
    /// shared view of the rest of the tape.
    fn with_grad(&mut self, id: NodeId, f: impl FnOnce(&[Node], &mut [f64])) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let len = self.nodes[id.0].value.len();
        let mut buf = self.nodes[id.0].grad.take().unwrap_or_else(|| vec![0.0; len]);
        f(&self.nodes, &mut buf);
        self.nodes[id.0].grad = Some(buf);
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, dims } | Op::TransposedConv2d { x, w, b, dims } => {
                let transposed = matches!(self.nodes[i].op, Op::TransposedConv2d { .. });
                let d = dims.conv();
                let run = |xv: &[f64], wv: &[f64], dx: Option<&mut [f64]>, dw: Option<&mut [f64]>, db: Option<&mut [f64]>| {
                    if transposed {
                        kernels::tconv_backward(xv, wv, g, &d, dx, dw, db)
                    } else {
                        kernels::conv2d_backward(xv, wv, g, &d, dx, dw, db)
                    }
                };
                let mut dx = self.take_grad(x);
                let mut dw = self.take_grad(w);
                let mut db = self.take_grad(b);
                run(&self.nodes[x.0].value, &self.nodes[w.0].value, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                for (id, buf) in [(x, dx), (w, dw), (b, db)] {
                    if let Some(v) = buf {
                        self.nodes[id.0].grad = Some(v);
                    }
                }
            }
            Op::LeakyRelu(x) => self.with_grad(x, |nodes, dx| {
                for ((d, gv), xv) in dx.iter_mut().zip(g).zip(&nodes[x.0].value) {
                    *d += if *xv > 0.0 { *gv } else { LEAKY_SLOPE * gv };
                }
            }),
            Op::Relu(x) => self.with_grad(x, |nodes, dx| {
                for ((d, gv), xv) in dx.iter_mut().zip(g).zip(&nodes[x.0].value) {
                    if *xv > 0.0 {
                        *d += gv;
                    }
                }
            }),
            Op::Sigmoid(x) => self.with_grad(x, |nodes, dx| {
                for ((d, gv), y) in dx.iter_mut().zip(g).zip(&nodes[i].value) {
                    *d += gv * y * (1.0 - y);
                }
            }),
            Op::Softmax(x) => {
                let shape = self.nodes[i].shape.clone();
                let (n, c, p) = (shape[0], shape[1], shape[2] * shape[3]);
                self.with_grad(x, |nodes, dx| {
                    let y = &nodes[i].value;
                    for b in 0..n {
                        let base = b * c * p;
                        for px in 0..p {
                            let mut dot = 0.0;
                            for ch in 0..c {
                                dot += y[base + ch * p + px] * g[base + ch * p + px];
                            }
                            for ch in 0..c {
                                let j = base + ch * p + px;
                                dx[j] += y[j] * (g[j] - dot);
                            }
                        }
                    }
                })
            }
            Op::Concat(xs) => {
                let shape = self.nodes[i].shape.clone();
                let (n, total, p) = (shape[0], shape[1], shape[2] * shape[3]);
                let mut off = 0;
                for x in xs {
                    let c = self.nodes[x.0].shape[1];
                    self.with_grad(x, |_, dx| {
                        for b in 0..n {
                            let src = &g[(b * total + off) * p..(b * total + off + c) * p];
                            for (d, s) in dx[b * c * p..(b + 1) * c * p].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    });
                    off += c;
                }
            }
            Op::GlobalMean(x) => {
                let shape = self.nodes[x.0].shape.clone();
                let p = shape[2] * shape[3];
                self.with_grad(x, |_, dx| {
                    for (j, d) in dx.iter_mut().enumerate() {
                        *d += g[j / p] / p as f64;
                    }
                })
            }
            Op::QuarterTurn { x, turns } => {
                let shape = self.nodes[i].shape.clone();
                let (side, per) = (shape[2], shape[1] * shape[2] * shape[3]);
                self.with_grad(x, |_, dx| {
                    for (b, k) in turns.iter().enumerate() {
                        let back = kernels::quarter_turn_planes(&g[b * per..(b + 1) * per], side, k.inverse());
                        for (d, v) in dx[b * per..(b + 1) * per].iter_mut().zip(back) {
                            *d += v;
                        }
                    }
                })
            }
            Op::MulMask { x, mask } => {
                let shape = self.nodes[i].shape.clone();
                let (n, c, p) = (shape[0], shape[1], shape[2] * shape[3]);
                self.with_grad(x, |nodes, dx| {
                    let m = &nodes[mask.0].value;
                    for b in 0..n {
                        for ch in 0..c {
                            let o = (b * c + ch) * p;
                            for px in 0..p {
                                dx[o + px] += g[o + px] * m[b * p + px];
                            }
                        }
                    }
                });
                self.with_grad(mask, |nodes, dm| {
                    let xv = &nodes[x.0].value;
                    for b in 0..n {
                        for ch in 0..c {
                            let o = (b * c + ch) * p;
                            for px in 0..p {
                                dm[b * p + px] += g[o + px] * xv[o + px];
                            }
                        }
                    }
                });
            }
            Op::Complement { x, channel } => {
                let shape = self.nodes[x.0].shape.clone();
                let (n, c, p) = (shape[0], shape[1], shape[2] * shape[3]);
                self.with_grad(x, |_, dx| {
                    for b in 0..n {
                        let o = (b * c + channel) * p;
                        for px in 0..p {
                            dx[o + px] -= g[b * p + px];
                        }
                    }
                })
            }
            Op::CrossEntropy { pred, target, weight, norm } => {
                let shape = self.nodes[pred.0].shape.clone();
                let (n, c, p) = (shape[0], shape[1], shape[2] * shape[3]);
                self.with_grad(pred, |nodes, dp| {
                    let pv = &nodes[pred.0].value;
                    for b in 0..n {
                        for ch in 0..c {
                            let o = (b * c + ch) * p;
                            for px in 0..p {
                                let t = target[o + px] * weight[b * p + px];
                                if t != 0.0 && pv[o + px] > PROB_FLOOR {
                                    dp[o + px] -= g[0] * t / (pv[o + px] * norm);
                                }
                            }
                        }
                    }
                })
            }
            Op::Bce { p, label } => self.with_grad(p, |nodes, dp| {
                let pv = &nodes[p.0].value;
                let n = pv.len() as f64;
                for (d, v) in dp.iter_mut().zip(pv) {
                    if *v <= PROB_FLOOR || *v >= 1.0 - PROB_FLOOR {
                        continue;
                    }
                    *d += g[0] * (-label / v + (1.0 - label) / (1.0 - v)) / n;
                }
            }),
            Op::Dot { x, weights } => self.with_grad(x, |_, dx| {
                for (d, w) in dx.iter_mut().zip(&weights) {
                    *d += g[0] * w;
                }
            }),
            Op::Combine(terms) => {
                for (id, c) in terms {
                    self.with_grad(id, |_, d| d[0] += g[0] * c);
                }
            }
        }
    }
}
