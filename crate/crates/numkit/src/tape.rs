//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Operations append nodes to the [`Tape`]; parents always precede children,
//! so the backward pass is a single reverse sweep over node indices. Gradients
//! accumulate into each node (repeated `backward` calls without [`Tape::zero_grad`]
//! add up), matching the usual autograd contract.

use crate::kernels;
use crate::{Array, Error, Prng, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Whether dropout samples a mask (training) or is the identity (inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Inference,
}

struct Node {
    value: Array,
    grad: Option<Array>,
    op: Op,
}

enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    AddBias { x: NodeId, bias: NodeId, axis: usize },
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    Reshape(NodeId),
    Softmax { x: NodeId, axis: usize },
    Mse(NodeId, NodeId),
    Sum(NodeId),
    MeanAxis { x: NodeId, axis: usize },
    ConcatCols(Vec<NodeId>),
    SliceCols { x: NodeId, start: usize },
    TemporalConv { x: NodeId, w: NodeId, stride: usize, padding: usize },
    RepeatT { x: NodeId, factor: usize },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, eps: f64 },
    /// `mask` is the keep mask already scaled by 1/(1-p); `None` means identity.
    Dropout { x: NodeId, mask: Option<Vec<f64>> },
}

/// A gradient tape: append-only computation graph over [`Array`] values.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a value with no parents (input, parameter, or constant).
    pub fn leaf(&mut self, value: Array) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    /// Accumulated gradient of a node, if any backward pass reached it.
    pub fn grad(&self, id: NodeId) -> Option<&Array> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Array, op: Op) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    // ── Elementwise and structural ops ──────────────────────────────────

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape("add", a, b)?;
        let data = zip_map(self.val(a).data(), self.val(b).data(), |x, y| x + y);
        let value = Array::from_vec(self.val(a).shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape("sub", a, b)?;
        let data = zip_map(self.val(a).data(), self.val(b).data(), |x, y| x - y);
        let value = Array::from_vec(self.val(a).shape().to_vec(), data)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape("mul", a, b)?;
        let data = zip_map(self.val(a).data(), self.val(b).data(), |x, y| x * y);
        let value = Array::from_vec(self.val(a).shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let data = self.val(x).data().iter().map(|v| v * factor).collect();
        let value = Array::from_vec(self.val(x).shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale(x, factor))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let data = self.val(x).data().iter().map(|v| v.max(0.0)).collect();
        let value = Array::from_vec(self.val(x).shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Relu(x))
    }

    /// Broadcast-add a 1-D bias along `axis` of `x`.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId, axis: usize) -> Result<NodeId> {
        let xs = self.val(x).shape().to_vec();
        let bs = self.val(bias).shape().to_vec();
        if axis >= xs.len() || bs != vec![xs[axis]] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: xs,
                rhs: bs,
            });
        }
        let xd = self.val(x).data();
        let bd = self.val(bias).data();
        let mut out = xd.to_vec();
        kernels::for_each_lane(&xs, axis, |_, base, stride, len| {
            for i in 0..len {
                out[base + i * stride] += bd[i];
            }
        });
        let value = Array::from_vec(xs, out)?;
        Ok(self.push(value, Op::AddBias { x, bias, axis }))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.val(x).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(x)))
    }

    pub fn transpose2d(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.val(x).transposed()?;
        Ok(self.push(value, Op::Transpose(x)))
    }

    /// Concatenate 2-D arrays along the column axis.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Config("concat_cols: no inputs".into()));
        }
        let rows = self.val(parts[0]).shape()[0];
        let mut total = 0;
        for &p in parts {
            let s = self.val(p).shape();
            if s.len() != 2 || s[0] != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.val(parts[0]).shape().to_vec(),
                    rhs: s.to_vec(),
                });
            }
            total += s[1];
        }
        let mut out = vec![0.0; rows * total];
        let mut col = 0;
        for &p in parts {
            let s = self.val(p).shape().to_vec();
            let d = self.val(p).data();
            for r in 0..rows {
                out[r * total + col..r * total + col + s[1]]
                    .copy_from_slice(&d[r * s[1]..(r + 1) * s[1]]);
            }
            col += s[1];
        }
        let value = Array::from_vec(vec![rows, total], out)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Take columns `start..start+len` of a 2-D array.
    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let s = self.val(x).shape().to_vec();
        if s.len() != 2 || start + len > s[1] || len == 0 {
            return Err(Error::InvalidShape {
                op: "slice_cols",
                shape: s,
                reason: format!("columns {start}..{} out of range", start + len),
            });
        }
        let (rows, cols) = (s[0], s[1]);
        let d = self.val(x).data();
        let mut out = vec![0.0; rows * len];
        for r in 0..rows {
            out[r * len..(r + 1) * len].copy_from_slice(&d[r * cols + start..r * cols + start + len]);
        }
        let value = Array::from_vec(vec![rows, len], out)?;
        Ok(self.push(value, Op::SliceCols { x, start }))
    }

    // ── Linear algebra ──────────────────────────────────────────────────

    /// Standard matrix product of 2-D arrays.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.val(a).shape().to_vec();
        let sb = self.val(b).shape().to_vec();
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, p) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * p];
        kernels::mm_nn_acc(self.val(a).data(), self.val(b).data(), m, k, p, &mut out);
        let value = Array::from_vec(vec![m, p], out)?;
        Ok(self.push(value, Op::Matmul(a, b)))
    }

    // ── Reductions and normalizations ───────────────────────────────────

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.val(x).data().iter().sum();
        self.push(Array::scalar(total), Op::Sum(x))
    }

    /// Mean along `axis`, dropping that axis from the shape.
    pub fn mean_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let s = self.val(x).shape().to_vec();
        if axis >= s.len() {
            return Err(Error::Config(format!(
                "mean_axis: axis {axis} out of range for shape {s:?}"
            )));
        }
        let mut out_shape: Vec<usize> = s.clone();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let d = self.val(x).data();
        let mut out = vec![0.0; out_shape.iter().product()];
        kernels::for_each_lane(&s, axis, |lane, base, stride, len| {
            let mut acc = 0.0;
            for i in 0..len {
                acc += d[base + i * stride];
            }
            out[lane] = acc / len as f64;
        });
        let value = Array::from_vec(out_shape, out)?;
        Ok(self.push(value, Op::MeanAxis { x, axis }))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let s = self.val(x).shape().to_vec();
        if axis >= s.len() {
            return Err(Error::Config(format!(
                "softmax: axis {axis} out of range for shape {s:?}"
            )));
        }
        let mut out = vec![0.0; self.val(x).numel()];
        kernels::softmax(self.val(x).data(), &s, axis, &mut out);
        let value = Array::from_vec(s, out)?;
        Ok(self.push(value, Op::Softmax { x, axis }))
    }

    /// Mean squared error between two same-shape arrays, as a scalar node.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape("mse", a, b)?;
        let n = self.val(a).numel() as f64;
        let total: f64 = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Array::scalar(total / n), Op::Mse(a, b)))
    }

    /// Row-wise layer normalization of a 2-D array with learnable gain/shift.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let s = self.val(x).shape().to_vec();
        if s.len() != 2 {
            return Err(Error::InvalidShape {
                op: "layer_norm",
                shape: s,
                reason: "expected a 2-D array".into(),
            });
        }
        let d = s[1];
        if self.val(gamma).shape() != [d] || self.val(beta).shape() != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: s,
                rhs: self.val(gamma).shape().to_vec(),
            });
        }
        let xd = self.val(x).data();
        let gd = self.val(gamma).data();
        let bd = self.val(beta).data();
        let rows = s[0];
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let (mean, rstd) = row_stats(row, eps);
            for j in 0..d {
                out[r * d + j] = (row[j] - mean) * rstd * gd[j] + bd[j];
            }
        }
        let value = Array::from_vec(s, out)?;
        Ok(self.push(value, Op::LayerNorm { x, gamma, beta, eps }))
    }

    // ── Convolution and sequence ops ────────────────────────────────────

    /// 1-D convolution along the middle (time) axis of `x: [C_in, T, V]`
    /// with kernel `w: [C_out, C_in, k]`, applied independently per node v.
    pub fn temporal_conv1d(
        &mut self,
        x: NodeId,
        w: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let xs = self.val(x).shape().to_vec();
        let ws = self.val(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 3 || ws[1] != xs[0] {
            return Err(Error::ShapeMismatch {
                op: "temporal_conv1d",
                lhs: xs,
                rhs: ws,
            });
        }
        let kernel = ws[2];
        if kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "temporal_conv1d: kernel size {kernel} must be odd"
            )));
        }
        if stride == 0 {
            return Err(Error::Config("temporal_conv1d: stride must be >= 1".into()));
        }
        let (c_in, t, v) = (xs[0], xs[1], xs[2]);
        let c_out = ws[0];
        let t_out = match kernels::conv_out_len(t, kernel, stride, padding) {
            Some(n) if n >= 1 => n,
            _ => {
                return Err(Error::Config(format!(
                    "temporal_conv1d: output length < 1 for T={t}, k={kernel}, \
                     stride={stride}, padding={padding}"
                )))
            }
        };
        let mut out = vec![0.0; c_out * t_out * v];
        kernels::tconv_acc(
            self.val(x).data(),
            self.val(w).data(),
            c_in,
            t,
            v,
            c_out,
            kernel,
            stride,
            padding,
            t_out,
            &mut out,
        );
        let value = Array::from_vec(vec![c_out, t_out, v], out)?;
        Ok(self.push(value, Op::TemporalConv { x, w, stride, padding }))
    }

    /// Nearest-neighbor repeat along the time axis of `x: [C, T, V]`.
    pub fn repeat_t(&mut self, x: NodeId, factor: usize) -> Result<NodeId> {
        let s = self.val(x).shape().to_vec();
        if s.len() != 3 {
            return Err(Error::InvalidShape {
                op: "repeat_t",
                shape: s,
                reason: "expected [C, T, V]".into(),
            });
        }
        if factor == 0 {
            return Err(Error::Config("repeat_t: factor must be >= 1".into()));
        }
        let (c, t, v) = (s[0], s[1], s[2]);
        let d = self.val(x).data();
        let mut out = vec![0.0; c * t * factor * v];
        for ci in 0..c {
            for ti in 0..t {
                let src = &d[(ci * t + ti) * v..(ci * t + ti + 1) * v];
                for j in 0..factor {
                    let dst = (ci * t * factor + ti * factor + j) * v;
                    out[dst..dst + v].copy_from_slice(src);
                }
            }
        }
        let value = Array::from_vec(vec![c, t * factor, v], out)?;
        Ok(self.push(value, Op::RepeatT { x, factor }))
    }

    /// Inverted dropout: in train mode keeps each element with probability
    /// 1-p and scales kept elements by 1/(1-p); the identity at inference or
    /// when p == 0.
    pub fn dropout(
        &mut self,
        x: NodeId,
        p: f64,
        mode: DropoutMode,
        rng: &mut Prng,
    ) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!(
                "dropout: probability {p} outside [0, 1)"
            )));
        }
        if mode == DropoutMode::Inference || p == 0.0 {
            let value = self.val(x).clone();
            return Ok(self.push(value, Op::Dropout { x, mask: None }));
        }
        let keep_scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.val(x).numel())
            .map(|_| if rng.unit() >= p { keep_scale } else { 0.0 })
            .collect();
        let data = zip_map(self.val(x).data(), &mask, |v, m| v * m);
        let value = Array::from_vec(self.val(x).shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { x, mask: Some(mask) }))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root, accumulating gradients into every
    /// reachable node. Calling it again without [`Tape::zero_grad`] adds a
    /// second set of contributions.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if !self.val(root).is_scalar() {
            return Err(Error::NonScalarRoot {
                shape: self.val(root).shape().to_vec(),
            });
        }
        let mut scratch: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        scratch[root.0] = Some(vec![1.0]);
        for id in (0..=root.0).rev() {
            let Some(g) = scratch[id].take() else { continue };
            self.propagate(id, &g, &mut scratch);
            let node = &mut self.nodes[id];
            match &mut node.grad {
                Some(acc) => {
                    for (a, gi) in acc.data_mut().iter_mut().zip(&g) {
                        *a += gi;
                    }
                }
                None => {
                    let shape = node.value.shape().to_vec();
                    node.grad = Some(Array::from_vec(shape, g).expect("grad shape"));
                }
            }
        }
        Ok(())
    }

    /// Distribute the upstream gradient `g` of node `id` to its parents.
    ///
    /// Parent scratch buffers are borrowed one at a time; ops whose backward
    /// kernel writes several parents at once go through local temporaries, so
    /// an op may safely use the same node for both operands.
    fn propagate(&self, id: usize, g: &[f64], scratch: &mut [Option<Vec<f64>>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for (d, gi) in acc_buf(scratch, *a, self.val(*a).numel()).iter_mut().zip(g) {
                    *d += gi;
                }
                for (d, gi) in acc_buf(scratch, *b, self.val(*b).numel()).iter_mut().zip(g) {
                    *d += gi;
                }
            }
            Op::Sub(a, b) => {
                for (d, gi) in acc_buf(scratch, *a, self.val(*a).numel()).iter_mut().zip(g) {
                    *d += gi;
                }
                for (d, gi) in acc_buf(scratch, *b, self.val(*b).numel()).iter_mut().zip(g) {
                    *d -= gi;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.val(*a).data(), self.val(*b).data());
                let da = acc_buf(scratch, *a, av.len());
                for i in 0..g.len() {
                    da[i] += g[i] * bv[i];
                }
                let db = acc_buf(scratch, *b, bv.len());
                for i in 0..g.len() {
                    db[i] += g[i] * av[i];
                }
            }
            Op::Scale(x, f) => {
                let dx = acc_buf(scratch, *x, g.len());
                for i in 0..g.len() {
                    dx[i] += g[i] * f;
                }
            }
            Op::Relu(x) => {
                let xv = self.val(*x).data();
                let dx = acc_buf(scratch, *x, xv.len());
                for i in 0..g.len() {
                    if xv[i] > 0.0 {
                        dx[i] += g[i];
                    }
                }
            }
            Op::AddBias { x, bias, axis } => {
                let shape = self.val(*x).shape().to_vec();
                let dx = acc_buf(scratch, *x, g.len());
                for (d, gi) in dx.iter_mut().zip(g) {
                    *d += gi;
                }
                let db = acc_buf(scratch, *bias, shape[*axis]);
                kernels::for_each_lane(&shape, *axis, |_, base, stride, len| {
                    for i in 0..len {
                        db[i] += g[base + i * stride];
                    }
                });
            }
            Op::Matmul(a, b) => {
                let (sa, sb) = (
                    self.val(*a).shape().to_vec(),
                    self.val(*b).shape().to_vec(),
                );
                let (m, k, p) = (sa[0], sa[1], sb[1]);
                kernels::mm_nt_acc(
                    g,
                    self.val(*b).data(),
                    m,
                    p,
                    k,
                    acc_buf(scratch, *a, m * k),
                );
                kernels::mm_tn_acc(
                    self.val(*a).data(),
                    g,
                    m,
                    k,
                    p,
                    acc_buf(scratch, *b, k * p),
                );
            }
            Op::Transpose(x) => {
                let s = self.val(*x).shape().to_vec();
                let (r, c) = (s[0], s[1]);
                let dx = acc_buf(scratch, *x, r * c);
                // g has shape [c, r]
                for i in 0..c {
                    for j in 0..r {
                        dx[j * c + i] += g[i * r + j];
                    }
                }
            }
            Op::Reshape(x) => {
                let dx = acc_buf(scratch, *x, g.len());
                for (d, gi) in dx.iter_mut().zip(g) {
                    *d += gi;
                }
            }
            Op::Softmax { x, axis } => {
                let y = self.nodes[id].value.data();
                let shape = self.nodes[id].value.shape().to_vec();
                kernels::softmax_backward_acc(y, g, &shape, *axis, acc_buf(scratch, *x, y.len()));
            }
            Op::Mse(a, b) => {
                let n = self.val(*a).numel();
                let scale = 2.0 * g[0] / n as f64;
                let diff: Vec<f64> = self
                    .val(*a)
                    .data()
                    .iter()
                    .zip(self.val(*b).data())
                    .map(|(x, y)| scale * (x - y))
                    .collect();
                let da = acc_buf(scratch, *a, n);
                for i in 0..n {
                    da[i] += diff[i];
                }
                let db = acc_buf(scratch, *b, n);
                for i in 0..n {
                    db[i] -= diff[i];
                }
            }
            Op::Sum(x) => {
                let dx = acc_buf(scratch, *x, self.val(*x).numel());
                for d in dx.iter_mut() {
                    *d += g[0];
                }
            }
            Op::MeanAxis { x, axis } => {
                let shape = self.val(*x).shape().to_vec();
                let dx = acc_buf(scratch, *x, self.val(*x).numel());
                kernels::for_each_lane(&shape, *axis, |lane, base, stride, len| {
                    let gi = g[lane] / len as f64;
                    for i in 0..len {
                        dx[base + i * stride] += gi;
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let rows = self.nodes[id].value.shape()[0];
                let total = self.nodes[id].value.shape()[1];
                let mut col = 0;
                for &p in parts {
                    let w = self.val(p).shape()[1];
                    let dp = acc_buf(scratch, p, rows * w);
                    for r in 0..rows {
                        for j in 0..w {
                            dp[r * w + j] += g[r * total + col + j];
                        }
                    }
                    col += w;
                }
            }
            Op::SliceCols { x, start } => {
                let cols = self.val(*x).shape()[1];
                let len = self.nodes[id].value.shape()[1];
                let rows = self.nodes[id].value.shape()[0];
                let dx = acc_buf(scratch, *x, rows * cols);
                for r in 0..rows {
                    for j in 0..len {
                        dx[r * cols + start + j] += g[r * len + j];
                    }
                }
            }
            Op::TemporalConv { x, w, stride, padding } => {
                let xs = self.val(*x).shape().to_vec();
                let ws = self.val(*w).shape().to_vec();
                let t_out = self.nodes[id].value.shape()[1];
                let (xv, wv) = (self.val(*x).data(), self.val(*w).data());
                let mut dx = vec![0.0; xv.len()];
                let mut dw = vec![0.0; wv.len()];
                kernels::tconv_backward_acc(
                    xv, wv, g, xs[0], xs[1], xs[2], ws[0], ws[2], *stride, *padding, t_out,
                    &mut dx, &mut dw,
                );
                let ax = acc_buf(scratch, *x, xv.len());
                for i in 0..dx.len() {
                    ax[i] += dx[i];
                }
                let aw = acc_buf(scratch, *w, wv.len());
                for i in 0..dw.len() {
                    aw[i] += dw[i];
                }
            }
            Op::RepeatT { x, factor } => {
                let s = self.val(*x).shape().to_vec();
                let (c, t, v) = (s[0], s[1], s[2]);
                let dx = acc_buf(scratch, *x, c * t * v);
                for ci in 0..c {
                    for ti in 0..t {
                        for j in 0..*factor {
                            let src = (ci * t * factor + ti * factor + j) * v;
                            let dst = (ci * t + ti) * v;
                            for vi in 0..v {
                                dx[dst + vi] += g[src + vi];
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta, eps } => {
                let s = self.val(*x).shape().to_vec();
                let (rows, d) = (s[0], s[1]);
                let xv = self.val(*x).data();
                let gv = self.val(*gamma).data();
                let mut dx = vec![0.0; rows * d];
                let mut dgamma = vec![0.0; d];
                let mut dbeta = vec![0.0; d];
                for r in 0..rows {
                    let row = &xv[r * d..(r + 1) * d];
                    let g_row = &g[r * d..(r + 1) * d];
                    let (mean, rstd) = row_stats(row, *eps);
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for j in 0..d {
                        let xhat = (row[j] - mean) * rstd;
                        let dxhat = g_row[j] * gv[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        dgamma[j] += g_row[j] * xhat;
                        dbeta[j] += g_row[j];
                    }
                    let inv_d = 1.0 / d as f64;
                    for j in 0..d {
                        let xhat = (row[j] - mean) * rstd;
                        let dxhat = g_row[j] * gv[j];
                        dx[r * d + j] +=
                            rstd * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
                    }
                }
                let ax = acc_buf(scratch, *x, rows * d);
                for i in 0..dx.len() {
                    ax[i] += dx[i];
                }
                let ag = acc_buf(scratch, *gamma, d);
                for i in 0..d {
                    ag[i] += dgamma[i];
                }
                let ab = acc_buf(scratch, *beta, d);
                for i in 0..d {
                    ab[i] += dbeta[i];
                }
            }
            Op::Dropout { x, mask } => {
                let dx = acc_buf(scratch, *x, g.len());
                match mask {
                    None => {
                        for (d, gi) in dx.iter_mut().zip(g) {
                            *d += gi;
                        }
                    }
                    Some(m) => {
                        for i in 0..g.len() {
                            dx[i] += g[i] * m[i];
                        }
                    }
                }
            }
        }
    }

    fn check_same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.val(a).shape() != self.val(b).shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.val(a).shape().to_vec(),
                rhs: self.val(b).shape().to_vec(),
            });
        }
        Ok(())
    }
}

/// Borrow (allocating on first touch) the scratch gradient buffer of a node.
fn acc_buf(scratch: &mut [Option<Vec<f64>>], pid: NodeId, numel: usize) -> &mut [f64] {
    scratch[pid.0]
        .get_or_insert_with(|| vec![0.0; numel])
        .as_mut_slice()
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// Mean and reciprocal standard deviation of a row (population variance).
fn row_stats(row: &[f64], eps: f64) -> (f64, f64) {
    let d = row.len() as f64;
    let mean = row.iter().sum::<f64>() / d;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    (mean, 1.0 / (var + eps).sqrt())
}
