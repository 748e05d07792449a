//! The recording tape: forward kernels plus their reverse-mode VJPs.
//!
//! Operations append nodes in topological order (inputs always precede
//! outputs); `backward` replays the records exactly once in reverse,
//! accumulating gradients into every node that requires them. One tape is
//! created per training step and dropped afterwards.

use std::sync::atomic::{AtomicU64, Ordering};

use super::{NodeId, Tensor, TensorError};

static TAPE_COUNTER: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add { a: usize, b: usize },
    /// (rows, cols) + (cols,): the vector is added to every row.
    AddRow { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    Relu { a: usize },
    Matmul { a: usize, b: usize },
    /// out = A @ B^T with A (m,k), B (n,k).
    MatmulNt { a: usize, b: usize },
    Softmax { a: usize, axis: usize },
    LogSoftmax { a: usize, axis: usize },
    LayerNorm { x: usize, gain: usize, bias: usize, eps: f64 },
    Embedding { table: usize, ids: Vec<usize> },
    Concat { parts: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize, len: usize },
    Sum { a: usize },
    Mean { a: usize },
    /// Cosine similarity of two equal-length vectors; scalar output.
    Cosine { a: usize, b: usize },
    /// Mean negative log-likelihood over valid target positions of a
    /// (tgt_len, vocab) log-probability matrix.
    GatherNll { logprobs: usize, targets: Vec<usize>, valid: Vec<bool> },
    /// Forward: per-row one-hot of the argmax. Backward: identity to the
    /// soft rows (the straight-through estimator).
    StraightThrough { soft: usize },
}

struct Node {
    op: Op,
    values: Vec<f64>,
    shape: Vec<usize>,
    requires_grad: bool,
}

/// Reverse-mode differentiation tape.
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Register a leaf tensor (parameter or input data).
    pub fn leaf(&mut self, values: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Tensor {
        assert_eq!(
            values.len(),
            shape.iter().product::<usize>(),
            "leaf values (len {}) do not match shape {:?}",
            values.len(),
            shape
        );
        self.push(Op::Leaf, values, shape, requires_grad)
    }

    /// Resolve a tensor to its node index, auto-registering detached tensors
    /// as no-grad constants.
    fn index_of(&mut self, t: &Tensor) -> usize {
        match t.node_id {
            Some(id) if id.tape == self.id => id.index,
            _ => {
                let leaf = self.leaf(t.values.clone(), t.shape.clone(), false);
                leaf.node_id.unwrap().index
            }
        }
    }

    fn push(&mut self, op: Op, values: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Tensor {
        debug_assert!(
            values.iter().all(|v| v.is_finite()),
            "non-finite value produced by {op:?}"
        );
        let index = self.nodes.len();
        self.nodes.push(Node { op, values: values.clone(), shape: shape.clone(), requires_grad });
        self.grads.push(None);
        Tensor { shape, values, requires_grad, node_id: Some(NodeId { tape: self.id, index }) }
    }

    fn values(&self, idx: usize) -> &[f64] {
        &self.nodes[idx].values
    }

    fn rg(&self, idx: usize) -> bool {
        self.nodes[idx].requires_grad
    }

    // ── Elementwise ──────────────────────────────────────────────────

    pub fn add(&mut self, a: &Tensor, b: &Tensor) -> Tensor {
        if a.ndim() == 2 && b.ndim() == 1 && a.shape[1] == b.shape[0] {
            return self.add_row(a, b);
        }
        assert_eq!(a.shape, b.shape, "add: shape mismatch {:?} vs {:?}", a.shape, b.shape);
        let (ia, ib) = (self.index_of(a), self.index_of(b));
        let out = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
        self.push(Op::Add { a: ia, b: ib }, out, a.shape.clone(), self.rg(ia) || self.rg(ib))
    }

    fn add_row(&mut self, a: &Tensor, b: &Tensor) -> Tensor {
        let (rows, cols) = (a.shape[0], a.shape[1]);
        let (ia, ib) = (self.index_of(a), self.index_of(b));
        let mut out = a.values.clone();
        for r in 0..rows {
            for c in 0..cols {
                out[r * cols + c] += b.values[c];
            }
        }
        self.push(Op::AddRow { a: ia, b: ib }, out, a.shape.clone(), self.rg(ia) || self.rg(ib))
    }

    pub fn sub(&mut self, a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!(a.shape, b.shape, "sub: shape mismatch {:?} vs {:?}", a.shape, b.shape);
        let (ia, ib) = (self.index_of(a), self.index_of(b));
        let out = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        self.push(Op::Sub { a: ia, b: ib }, out, a.shape.clone(), self.rg(ia) || self.rg(ib))
    }

    pub fn mul(&mut self, a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!(a.shape, b.shape, "mul: shape mismatch {:?} vs {:?}", a.shape, b.shape);
        let (ia, ib) = (self.index_of(a), self.index_of(b));
        let out = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
        self.push(Op::Mul { a: ia, b: ib }, out, a.shape.clone(), self.rg(ia) || self.rg(ib))
    }

    pub fn scale(&mut self, a: &Tensor, c: f64) -> Tensor {
        let ia = self.index_of(a);
        let out = a.values.iter().map(|x| x * c).collect();
        self.push(Op::Scale { a: ia, c }, out, a.shape.clone(), self.rg(ia))
    }

    pub fn relu(&mut self, a: &Tensor) -> Tensor {
        let ia = self.index_of(a);
        let out = a.values.iter().map(|x| x.max(0.0)).collect();
        self.push(Op::Relu { a: ia }, out, a.shape.clone(), self.rg(ia))
    }

    // ── Matrix products ──────────────────────────────────────────────

    pub fn matmul(&mut self, a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!(a.ndim(), 2, "matmul: lhs must be 2-D, got {:?}", a.shape);
        assert_eq!(b.ndim(), 2, "matmul: rhs must be 2-D, got {:?}", b.shape);
        assert_eq!(
            a.shape[1], b.shape[0],
            "matmul: inner dims differ, {:?} vs {:?}",
            a.shape, b.shape
        );
        let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
        let (ia, ib) = (self.index_of(a), self.index_of(b));
        let out = mm(&a.values, &b.values, m, k, n);
        self.push(Op::Matmul { a: ia, b: ib }, out, vec![m, n], self.rg(ia) || self.rg(ib))
    }

    /// A @ B^T for A (m,k), B (n,k) → (m,n). Used for attention scores.
    pub fn matmul_nt(&mut self, a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!(a.ndim(), 2, "matmul_nt: lhs must be 2-D, got {:?}", a.shape);
        assert_eq!(b.ndim(), 2, "matmul_nt: rhs must be 2-D, got {:?}", b.shape);
        assert_eq!(
            a.shape[1], b.shape[1],
            "matmul_nt: inner dims differ, {:?} vs {:?}",
            a.shape, b.shape
        );
        let (m, k, n) = (a.shape[0], a.shape[1], b.shape[0]);
        let (ia, ib) = (self.index_of(a), self.index_of(b));
        let out = mm_nt(&a.values, &b.values, m, k, n);
        self.push(Op::MatmulNt { a: ia, b: ib }, out, vec![m, n], self.rg(ia) || self.rg(ib))
    }

    // ── Normalizations ───────────────────────────────────────────────

    pub fn softmax(&mut self, a: &Tensor, axis: usize) -> Tensor {
        assert!(axis < a.ndim(), "softmax: axis {axis} out of range for shape {:?}", a.shape);
        let ia = self.index_of(a);
        let out = lanes_map(&a.values, &a.shape, axis, softmax_lane);
        self.push(Op::Softmax { a: ia, axis }, out, a.shape.clone(), self.rg(ia))
    }

    pub fn log_softmax(&mut self, a: &Tensor, axis: usize) -> Tensor {
        assert!(axis < a.ndim(), "log_softmax: axis {axis} out of range for shape {:?}", a.shape);
        let ia = self.index_of(a);
        let out = lanes_map(&a.values, &a.shape, axis, log_softmax_lane);
        self.push(Op::LogSoftmax { a: ia, axis }, out, a.shape.clone(), self.rg(ia))
    }

    /// Layer normalization over the last axis with learnable gain and bias.
    pub fn layer_norm(&mut self, x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Tensor {
        assert!(eps > 0.0, "layer_norm: eps must be positive");
        let cols = x.cols();
        assert_eq!(gain.numel(), cols, "layer_norm: gain shape {:?} vs cols {cols}", gain.shape);
        assert_eq!(bias.numel(), cols, "layer_norm: bias shape {:?} vs cols {cols}", bias.shape);
        let (ix, ig, ib) = (self.index_of(x), self.index_of(gain), self.index_of(bias));
        let rows = x.rows();
        let mut out = vec![0.0; x.numel()];
        for r in 0..rows {
            let row = &x.values[r * cols..(r + 1) * cols];
            let (mu, inv) = row_moments(row, eps);
            for c in 0..cols {
                out[r * cols + c] = gain.values[c] * (row[c] - mu) * inv + bias.values[c];
            }
        }
        let rg = self.rg(ix) || self.rg(ig) || self.rg(ib);
        self.push(Op::LayerNorm { x: ix, gain: ig, bias: ib, eps }, out, x.shape.clone(), rg)
    }

    // ── Structure ────────────────────────────────────────────────────

    /// Look up embedding rows: table (vocab, dim), ids → (len(ids), dim).
    pub fn embedding(&mut self, table: &Tensor, ids: &[usize]) -> Tensor {
        assert_eq!(table.ndim(), 2, "embedding: table must be 2-D");
        let (vocab, dim) = (table.shape[0], table.shape[1]);
        let it = self.index_of(table);
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            assert!(id < vocab, "embedding: id {id} out of range for vocab {vocab}");
            out.extend_from_slice(&table.values[id * dim..(id + 1) * dim]);
        }
        self.push(
            Op::Embedding { table: it, ids: ids.to_vec() },
            out,
            vec![ids.len(), dim],
            self.rg(it),
        )
    }

    /// Concatenate along axis 0 (stack) or the last axis (side by side).
    pub fn concat(&mut self, parts: &[&Tensor], axis: usize) -> Tensor {
        assert!(!parts.is_empty(), "concat: empty input");
        let ndim = parts[0].ndim();
        assert!(axis < ndim, "concat: axis {axis} out of range");
        assert!(parts.iter().all(|p| p.ndim() == ndim), "concat: mixed ranks");
        let idxs: Vec<usize> = parts.iter().map(|p| self.index_of(p)).collect();
        let rg = idxs.iter().any(|&i| self.rg(i));
        if ndim == 1 || axis == 0 {
            if ndim == 2 {
                let cols = parts[0].shape[1];
                assert!(parts.iter().all(|p| p.shape[1] == cols), "concat: column mismatch");
                let rows = parts.iter().map(|p| p.shape[0]).sum();
                let mut out = Vec::with_capacity(rows * cols);
                for p in parts {
                    out.extend_from_slice(&p.values);
                }
                self.push(Op::Concat { parts: idxs, axis }, out, vec![rows, cols], rg)
            } else {
                let len = parts.iter().map(|p| p.numel()).sum();
                let mut out = Vec::with_capacity(len);
                for p in parts {
                    out.extend_from_slice(&p.values);
                }
                self.push(Op::Concat { parts: idxs, axis }, out, vec![len], rg)
            }
        } else {
            let rows = parts[0].shape[0];
            assert!(parts.iter().all(|p| p.shape[0] == rows), "concat: row mismatch");
            let cols: usize = parts.iter().map(|p| p.shape[1]).sum();
            let mut out = vec![0.0; rows * cols];
            for r in 0..rows {
                let mut offset = 0;
                for p in parts {
                    let pc = p.shape[1];
                    out[r * cols + offset..r * cols + offset + pc]
                        .copy_from_slice(&p.values[r * pc..(r + 1) * pc]);
                    offset += pc;
                }
            }
            self.push(Op::Concat { parts: idxs, axis }, out, vec![rows, cols], rg)
        }
    }

    /// Slice `len` indices starting at `start` along `axis`.
    pub fn slice(&mut self, a: &Tensor, axis: usize, start: usize, len: usize) -> Tensor {
        assert!(axis < a.ndim(), "slice: axis {axis} out of range for shape {:?}", a.shape);
        assert!(start + len <= a.shape[axis], "slice: range out of bounds");
        let ia = self.index_of(a);
        let (out, shape) = slice_values(&a.values, &a.shape, axis, start, len);
        self.push(Op::Slice { a: ia, axis, start, len }, out, shape, self.rg(ia))
    }

    // ── Reductions ───────────────────────────────────────────────────

    pub fn sum(&mut self, a: &Tensor) -> Tensor {
        let ia = self.index_of(a);
        let s: f64 = a.values.iter().sum();
        self.push(Op::Sum { a: ia }, vec![s], vec![1], self.rg(ia))
    }

    pub fn mean(&mut self, a: &Tensor) -> Tensor {
        assert!(a.numel() > 0, "mean: empty tensor");
        let ia = self.index_of(a);
        let s: f64 = a.values.iter().sum();
        self.push(Op::Mean { a: ia }, vec![s / a.numel() as f64], vec![1], self.rg(ia))
    }

    /// Cosine similarity of two equal-length vectors (any shape; flattened).
    pub fn cosine(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
        assert_eq!(
            a.numel(),
            b.numel(),
            "cosine: length mismatch {:?} vs {:?}",
            a.shape,
            b.shape
        );
        assert!(a.numel() >= 1, "cosine: empty vectors");
        let na = norm(&a.values);
        let nb = norm(&b.values);
        if na == 0.0 || nb == 0.0 {
            return Err(TensorError::ZeroNorm);
        }
        let (ia, ib) = (self.index_of(a), self.index_of(b));
        let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
        let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
        Ok(self.push(Op::Cosine { a: ia, b: ib }, vec![cos], vec![1], self.rg(ia) || self.rg(ib)))
    }

    /// Mean NLL of `targets` under a (tgt_len, vocab) log-probability matrix,
    /// restricted to positions where `valid` is true.
    pub fn gather_nll(
        &mut self,
        logprobs: &Tensor,
        targets: &[usize],
        valid: &[bool],
    ) -> Result<Tensor, TensorError> {
        assert_eq!(logprobs.ndim(), 2, "gather_nll: logprobs must be 2-D");
        let (rows, cols) = (logprobs.shape[0], logprobs.shape[1]);
        assert_eq!(targets.len(), rows, "gather_nll: targets/rows mismatch");
        assert_eq!(valid.len(), rows, "gather_nll: valid/rows mismatch");
        let n_valid = valid.iter().filter(|v| **v).count();
        if n_valid == 0 {
            return Err(TensorError::NoValidTargets);
        }
        let il = self.index_of(logprobs);
        let mut acc = 0.0;
        for t in 0..rows {
            if valid[t] {
                assert!(targets[t] < cols, "gather_nll: target id out of range");
                acc += logprobs.values[t * cols + targets[t]];
            }
        }
        let loss = -acc / n_valid as f64;
        Ok(self.push(
            Op::GatherNll { logprobs: il, targets: targets.to_vec(), valid: valid.to_vec() },
            vec![loss],
            vec![1],
            self.rg(il),
        ))
    }

    /// Straight-through discretization: forward rows are exact one-hots of
    /// the per-row argmax (ties → lowest index); backward passes gradients
    /// unchanged to the soft rows.
    pub fn straight_through(&mut self, soft: &Tensor) -> Tensor {
        assert_eq!(soft.ndim(), 2, "straight_through: input must be 2-D");
        let (rows, cols) = (soft.shape[0], soft.shape[1]);
        let is = self.index_of(soft);
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &soft.values[r * cols..(r + 1) * cols];
            out[r * cols + argmax(row)] = 1.0;
        }
        self.push(Op::StraightThrough { soft: is }, out, soft.shape.clone(), self.rg(is))
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Gradient of the last backward pass with respect to `t`, if any flowed.
    pub fn grad(&self, t: &Tensor) -> Option<&[f64]> {
        match t.node_id {
            Some(id) if id.tape == self.id => self.grads[id.index].as_deref(),
            _ => None,
        }
    }

    fn accumulate(&mut self, idx: usize, delta: &[f64]) {
        if !self.nodes[idx].requires_grad {
            return;
        }
        match &mut self.grads[idx] {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => self.grads[idx] = Some(delta.to_vec()),
        }
    }

    /// Reverse sweep from a scalar loss. Gradients are then available via
    /// [`Tape::grad`] for every requires-grad tensor on this tape.
    pub fn backward(&mut self, loss: &Tensor) -> Result<(), TensorError> {
        let id = loss.node_id.ok_or(TensorError::NotOnTape)?;
        if id.tape != self.id {
            return Err(TensorError::NotOnTape);
        }
        if loss.numel() != 1 {
            return Err(TensorError::NotScalar { numel: loss.numel() });
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[id.index] = Some(vec![1.0]);

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(d_out) = self.grads[i].clone() else { continue };
            let op = self.nodes[i].op.clone();
            self.backward_op(i, &op, &d_out);
        }
        Ok(())
    }

    fn backward_op(&mut self, out_idx: usize, op: &Op, d_out: &[f64]) {
        match op {
            Op::Leaf => {}
            Op::Add { a, b } => {
                self.accumulate(*a, d_out);
                self.accumulate(*b, d_out);
            }
            Op::AddRow { a, b } => {
                self.accumulate(*a, d_out);
                if self.rg(*b) {
                    let cols = self.nodes[*b].values.len();
                    let mut db = vec![0.0; cols];
                    for (i, d) in d_out.iter().enumerate() {
                        db[i % cols] += d;
                    }
                    self.accumulate(*b, &db);
                }
            }
            Op::Sub { a, b } => {
                self.accumulate(*a, d_out);
                if self.rg(*b) {
                    let neg: Vec<f64> = d_out.iter().map(|d| -d).collect();
                    self.accumulate(*b, &neg);
                }
            }
            Op::Mul { a, b } => {
                if self.rg(*a) {
                    let da: Vec<f64> =
                        d_out.iter().zip(self.values(*b)).map(|(d, y)| d * y).collect();
                    self.accumulate(*a, &da);
                }
                if self.rg(*b) {
                    let db: Vec<f64> =
                        d_out.iter().zip(self.values(*a)).map(|(d, x)| d * x).collect();
                    self.accumulate(*b, &db);
                }
            }
            Op::Scale { a, c } => {
                if self.rg(*a) {
                    let da: Vec<f64> = d_out.iter().map(|d| d * c).collect();
                    self.accumulate(*a, &da);
                }
            }
            Op::Relu { a } => {
                if self.rg(*a) {
                    let da: Vec<f64> = d_out
                        .iter()
                        .zip(self.values(*a))
                        .map(|(d, x)| if *x > 0.0 { *d } else { 0.0 })
                        .collect();
                    self.accumulate(*a, &da);
                }
            }
            Op::Matmul { a, b } => {
                let (m, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let n = self.nodes[*b].shape[1];
                if self.rg(*a) {
                    // dA = dOut @ B^T
                    let da = mm_nt(d_out, self.values(*b), m, n, k);
                    self.accumulate(*a, &da);
                }
                if self.rg(*b) {
                    // dB = A^T @ dOut
                    let db = mm_tn(self.values(*a), d_out, m, k, n);
                    self.accumulate(*b, &db);
                }
            }
            Op::MatmulNt { a, b } => {
                let (m, k) = (self.nodes[*a].shape[0], self.nodes[*a].shape[1]);
                let n = self.nodes[*b].shape[0];
                if self.rg(*a) {
                    // dA = dOut @ B
                    let da = mm(d_out, self.values(*b), m, n, k);
                    self.accumulate(*a, &da);
                }
                if self.rg(*b) {
                    // dB = dOut^T @ A
                    let db = mm_tn(d_out, self.values(*a), m, n, k);
                    self.accumulate(*b, &db);
                }
            }
            Op::Softmax { a, axis } => {
                if self.rg(*a) {
                    let shape = self.nodes[out_idx].shape.clone();
                    let y = self.nodes[out_idx].values.clone();
                    let da = lanes_vjp(&y, d_out, &shape, *axis, |y_lane, d_lane, out| {
                        let dot: f64 = y_lane.iter().zip(d_lane.iter()).map(|(y, d)| y * d).sum();
                        for ((o, y), d) in out.iter_mut().zip(y_lane).zip(d_lane) {
                            *o = y * (d - dot);
                        }
                    });
                    self.accumulate(*a, &da);
                }
            }
            Op::LogSoftmax { a, axis } => {
                if self.rg(*a) {
                    let shape = self.nodes[out_idx].shape.clone();
                    let y = self.nodes[out_idx].values.clone();
                    let da = lanes_vjp(&y, d_out, &shape, *axis, |y_lane, d_lane, out| {
                        let sum_d: f64 = d_lane.iter().sum();
                        for ((o, y), d) in out.iter_mut().zip(y_lane).zip(d_lane) {
                            *o = d - y.exp() * sum_d;
                        }
                    });
                    self.accumulate(*a, &da);
                }
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let cols = *self.nodes[*x].shape.last().unwrap();
                let rows = self.nodes[*x].values.len() / cols;
                let xv = self.nodes[*x].values.clone();
                let gv = self.nodes[*gain].values.clone();
                let mut dx = vec![0.0; xv.len()];
                let mut dg = vec![0.0; cols];
                let mut db = vec![0.0; cols];
                for r in 0..rows {
                    let row = &xv[r * cols..(r + 1) * cols];
                    let (mu, inv) = row_moments(row, *eps);
                    let d_row = &d_out[r * cols..(r + 1) * cols];
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for c in 0..cols {
                        let xhat = (row[c] - mu) * inv;
                        let dxhat = d_row[c] * gv[c];
                        dg[c] += d_row[c] * xhat;
                        db[c] += d_row[c];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat;
                    }
                    mean_dxhat /= cols as f64;
                    mean_dxhat_xhat /= cols as f64;
                    for c in 0..cols {
                        let xhat = (row[c] - mu) * inv;
                        let dxhat = d_row[c] * gv[c];
                        dx[r * cols + c] = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                    }
                }
                self.accumulate(*x, &dx);
                self.accumulate(*gain, &dg);
                self.accumulate(*bias, &db);
            }
            Op::Embedding { table, ids } => {
                if self.rg(*table) {
                    let (vocab, dim) = (self.nodes[*table].shape[0], self.nodes[*table].shape[1]);
                    let mut dt = vec![0.0; vocab * dim];
                    for (t, &id) in ids.iter().enumerate() {
                        for c in 0..dim {
                            dt[id * dim + c] += d_out[t * dim + c];
                        }
                    }
                    self.accumulate(*table, &dt);
                }
            }
            Op::Concat { parts, axis } => {
                let ndim = self.nodes[out_idx].shape.len();
                if ndim == 1 || *axis == 0 {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.nodes[p].values.len();
                        let dp = d_out[offset..offset + n].to_vec();
                        self.accumulate(p, &dp);
                        offset += n;
                    }
                } else {
                    let rows = self.nodes[out_idx].shape[0];
                    let cols = self.nodes[out_idx].shape[1];
                    let mut offset = 0;
                    for &p in parts {
                        let pc = self.nodes[p].shape[1];
                        if self.rg(p) {
                            let mut dp = vec![0.0; rows * pc];
                            for r in 0..rows {
                                dp[r * pc..(r + 1) * pc].copy_from_slice(
                                    &d_out[r * cols + offset..r * cols + offset + pc],
                                );
                            }
                            self.accumulate(p, &dp);
                        }
                        offset += pc;
                    }
                }
            }
            Op::Slice { a, axis, start, len } => {
                if self.rg(*a) {
                    let shape = self.nodes[*a].shape.clone();
                    let mut da = vec![0.0; self.nodes[*a].values.len()];
                    scatter_slice(&mut da, d_out, &shape, *axis, *start, *len);
                    self.accumulate(*a, &da);
                }
            }
            Op::Sum { a } => {
                if self.rg(*a) {
                    let da = vec![d_out[0]; self.nodes[*a].values.len()];
                    self.accumulate(*a, &da);
                }
            }
            Op::Mean { a } => {
                if self.rg(*a) {
                    let n = self.nodes[*a].values.len();
                    let da = vec![d_out[0] / n as f64; n];
                    self.accumulate(*a, &da);
                }
            }
            Op::Cosine { a, b } => {
                let av = self.nodes[*a].values.clone();
                let bv = self.nodes[*b].values.clone();
                let na = norm(&av);
                let nb = norm(&bv);
                let dot: f64 = av.iter().zip(&bv).map(|(x, y)| x * y).sum();
                let cos = dot / (na * nb);
                let d = d_out[0];
                if self.rg(*a) {
                    let da: Vec<f64> = av
                        .iter()
                        .zip(&bv)
                        .map(|(x, y)| d * (y / (na * nb) - cos * x / (na * na)))
                        .collect();
                    self.accumulate(*a, &da);
                }
                if self.rg(*b) {
                    let db: Vec<f64> = av
                        .iter()
                        .zip(&bv)
                        .map(|(x, y)| d * (x / (na * nb) - cos * y / (nb * nb)))
                        .collect();
                    self.accumulate(*b, &db);
                }
            }
            Op::GatherNll { logprobs, targets, valid } => {
                if self.rg(*logprobs) {
                    let cols = self.nodes[*logprobs].shape[1];
                    let n_valid = valid.iter().filter(|v| **v).count() as f64;
                    let mut dl = vec![0.0; self.nodes[*logprobs].values.len()];
                    for (t, (&tgt, &ok)) in targets.iter().zip(valid).enumerate() {
                        if ok {
                            dl[t * cols + tgt] = -d_out[0] / n_valid;
                        }
                    }
                    self.accumulate(*logprobs, &dl);
                }
            }
            Op::StraightThrough { soft } => {
                self.accumulate(*soft, d_out);
            }
        }
    }
}

// ── Kernels ──────────────────────────────────────────────────────────

fn mm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    out
}

/// A (m,k) @ B^T for B (n,k) → (m,n).
fn mm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            out[i * n + j] = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// A^T (k,m) @ B for A (m,k), B (m,n) → (k,n).
fn mm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (kk, &av) in a_row.iter().enumerate() {
            let o_row = &mut out[kk * n..(kk + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn row_moments(row: &[f64], eps: f64) -> (f64, f64) {
    let n = row.len() as f64;
    let mu = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    (mu, 1.0 / (var + eps).sqrt())
}

fn softmax_lane(lane: &[f64], out: &mut [f64]) {
    let max = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(lane) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn log_softmax_lane(lane: &[f64], out: &mut [f64]) {
    let max = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = lane.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
    for (o, &x) in out.iter_mut().zip(lane) {
        *o = x - lse;
    }
}

/// Apply a lane function along `axis` of a 1-D or 2-D buffer.
fn lanes_map(values: &[f64], shape: &[usize], axis: usize, f: fn(&[f64], &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    if shape.len() == 1 || (shape.len() == 2 && axis == 1) {
        let cols = *shape.last().unwrap();
        for (lane, o) in values.chunks(cols).zip(out.chunks_mut(cols)) {
            f(lane, o);
        }
    } else {
        // Column lanes of a 2-D buffer.
        let (rows, cols) = (shape[0], shape[1]);
        let mut lane = vec![0.0; rows];
        let mut lane_out = vec![0.0; rows];
        for c in 0..cols {
            for r in 0..rows {
                lane[r] = values[r * cols + c];
            }
            f(&lane, &mut lane_out);
            for r in 0..rows {
                out[r * cols + c] = lane_out[r];
            }
        }
    }
    out
}

/// Lane-wise VJP helper mirroring [`lanes_map`].
fn lanes_vjp(
    y: &[f64],
    d_out: &[f64],
    shape: &[usize],
    axis: usize,
    f: impl Fn(&[f64], &[f64], &mut [f64]),
) -> Vec<f64> {
    let mut dx = vec![0.0; y.len()];
    if shape.len() == 1 || (shape.len() == 2 && axis == 1) {
        let cols = *shape.last().unwrap();
        for ((y_lane, d_lane), o) in
            y.chunks(cols).zip(d_out.chunks(cols)).zip(dx.chunks_mut(cols))
        {
            f(y_lane, d_lane, o);
        }
    } else {
        let (rows, cols) = (shape[0], shape[1]);
        let mut y_lane = vec![0.0; rows];
        let mut d_lane = vec![0.0; rows];
        let mut o_lane = vec![0.0; rows];
        for c in 0..cols {
            for r in 0..rows {
                y_lane[r] = y[r * cols + c];
                d_lane[r] = d_out[r * cols + c];
            }
            f(&y_lane, &d_lane, &mut o_lane);
            for r in 0..rows {
                dx[r * cols + c] = o_lane[r];
            }
        }
    }
    dx
}

fn slice_values(
    values: &[f64],
    shape: &[usize],
    axis: usize,
    start: usize,
    len: usize,
) -> (Vec<f64>, Vec<usize>) {
    if shape.len() == 1 {
        (values[start..start + len].to_vec(), vec![len])
    } else if axis == 0 {
        let cols = shape[1];
        (values[start * cols..(start + len) * cols].to_vec(), vec![len, cols])
    } else {
        let (rows, cols) = (shape[0], shape[1]);
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&values[r * cols + start..r * cols + start + len]);
        }
        (out, vec![rows, len])
    }
}

fn scatter_slice(
    da: &mut [f64],
    d_out: &[f64],
    shape: &[usize],
    axis: usize,
    start: usize,
    len: usize,
) {
    if shape.len() == 1 {
        da[start..start + len].copy_from_slice(d_out);
    } else if axis == 0 {
        let cols = shape[1];
        da[start * cols..(start + len) * cols].copy_from_slice(d_out);
    } else {
        let (rows, cols) = (shape[0], shape[1]);
        for r in 0..rows {
            da[r * cols + start..r * cols + start + len]
                .copy_from_slice(&d_out[r * len..(r + 1) * len]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
            assert!((a - e).abs() <= tol, "index {i}: actual {a} expected {e}");
        }
    }

    #[test]
    fn softmax_symmetry_and_stability() {
        let mut tape = Tape::new();
        let t = Tensor::new(vec![0.0, 0.0], vec![2]);
        let y = tape.softmax(&t, 0);
        assert_close(&y.values, &[0.5, 0.5], 1e-15);

        // Max subtraction keeps huge logits finite.
        let t = Tensor::new(vec![1000.0, 0.0], vec![2]);
        let y = tape.softmax(&t, 0);
        assert!(y.values[0] > 1.0 - 1e-12 && y.values[1] < 1e-12);
        assert!(y.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_of_log_weights_recovers_weights() {
        let mut tape = Tape::new();
        let t = Tensor::new(vec![1.0f64.ln(), 2.0f64.ln(), 3.0f64.ln()], vec![3]);
        let y = tape.softmax(&t, 0);
        assert_close(&y.values, &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        // Extreme but bounded inputs: the sum invariant must hold even when
        // individual entries underflow to zero.
        let mut tape = Tape::new();
        let t = Tensor::new(vec![1e4, -1e4, 3.0, 0.5, -2.0, 7.0], vec![2, 3]);
        let y = tape.softmax(&t, 1);
        for row in y.values.chunks(3) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row sum {s}");
            assert!(row.iter().all(|v| *v >= 0.0 && *v <= 1.0));
        }
        // Moderate inputs keep every entry strictly positive.
        let t = Tensor::new(vec![3.0, 0.5, -2.0, 7.0, 1.0, -1.0], vec![2, 3]);
        let y = tape.softmax(&t, 1);
        assert!(y.values.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    #[should_panic(expected = "axis")]
    fn softmax_bad_axis_panics() {
        let mut tape = Tape::new();
        let t = Tensor::new(vec![1.0, 2.0], vec![2]);
        tape.softmax(&t, 1);
    }

    #[test]
    fn softmax_column_axis() {
        let mut tape = Tape::new();
        let t = Tensor::new(vec![0.0, 1.0, 0.0, 1.0], vec![2, 2]);
        let y = tape.softmax(&t, 0);
        // Each column is [0, 0] →  [0.5, 0.5] after softmax down columns.
        assert_close(&y.values, &[0.5, 0.5, 0.5, 0.5], 1e-15);
    }

    #[test]
    fn cosine_basic_identities() {
        let mut tape = Tape::new();
        let a = Tensor::new(vec![1.0, 0.0], vec![2]);
        let b = Tensor::new(vec![1.0, 0.0], vec![2]);
        assert!((tape.cosine(&a, &b).unwrap().item() - 1.0).abs() < 1e-15);

        let b = Tensor::new(vec![0.0, 1.0], vec![2]);
        assert!(tape.cosine(&a, &b).unwrap().item().abs() < 1e-15);

        let a = Tensor::new(vec![1.0, 1.0], vec![2]);
        let b = Tensor::new(vec![1.0, 0.0], vec![2]);
        let expect = 1.0 / 2.0f64.sqrt();
        assert!((tape.cosine(&a, &b).unwrap().item() - expect).abs() < 1e-12);
    }

    #[test]
    fn cosine_scale_invariant_and_symmetric() {
        let mut tape = Tape::new();
        let a = Tensor::new(vec![0.3, -1.2, 0.7], vec![3]);
        let b = Tensor::new(vec![1.5, 0.2, -0.4], vec![3]);
        let ab = tape.cosine(&a, &b).unwrap().item();
        let ba = tape.cosine(&b, &a).unwrap().item();
        assert!((ab - ba).abs() < 1e-15);
        let a3 = Tensor::new(a.values.iter().map(|v| v * 3.0).collect(), vec![3]);
        let scaled = tape.cosine(&a3, &b).unwrap().item();
        assert!((ab - scaled).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn cosine_self_similarity_is_one() {
        let mut tape = Tape::new();
        for v in [vec![0.3, -1.2, 0.7], vec![1e-4, 2e-4], vec![5.0, 4.0, -3.0, 2.0]] {
            let t = Tensor::new(v.clone(), vec![v.len()]);
            let sim = tape.cosine(&t, &t).unwrap().item();
            assert!((sim - 1.0).abs() < 1e-12, "sim(a,a) = {sim}");
        }
    }

    #[test]
    fn cosine_zero_norm_is_error() {
        let mut tape = Tape::new();
        let a = Tensor::new(vec![0.0, 0.0], vec![2]);
        let b = Tensor::new(vec![1.0, 0.0], vec![2]);
        assert!(matches!(tape.cosine(&a, &b), Err(TensorError::ZeroNorm)));
    }

    #[test]
    fn layer_norm_rows() {
        let mut tape = Tape::new();
        let gain = Tensor::new(vec![1.0, 1.0], vec![2]);
        let bias = Tensor::new(vec![0.0, 0.0], vec![2]);

        // (0, 2): mean 1, population std 1 → (−1, 1) as eps → 0.
        let x = Tensor::new(vec![0.0, 2.0], vec![1, 2]);
        let y = tape.layer_norm(&x, &gain, &bias, 1e-12);
        assert_close(&y.values, &[-1.0, 1.0], 1e-6);

        // Zero-variance row collapses to bias.
        let x = Tensor::new(vec![1.0, 1.0, 1.0], vec![1, 3]);
        let gain3 = Tensor::new(vec![1.0; 3], vec![3]);
        let bias3 = Tensor::new(vec![0.0; 3], vec![3]);
        let y = tape.layer_norm(&x, &gain3, &bias3, 1e-12);
        assert_close(&y.values, &[0.0, 0.0, 0.0], 1e-9);

        // gain = 0 → all outputs equal bias.
        let x = Tensor::new(vec![3.0, -1.0, 9.0], vec![1, 3]);
        let zero_gain = Tensor::new(vec![0.0; 3], vec![3]);
        let bias3 = Tensor::new(vec![0.5; 3], vec![3]);
        let y = tape.layer_norm(&x, &zero_gain, &bias3, 1e-12);
        assert_close(&y.values, &[0.5, 0.5, 0.5], 1e-15);
    }

    #[test]
    fn layer_norm_moments() {
        let mut tape = Tape::new();
        let gain = Tensor::new(vec![1.0; 4], vec![4]);
        let bias = Tensor::new(vec![0.0; 4], vec![4]);
        let x = Tensor::new(vec![0.3, -2.0, 5.5, 1.1, 4.0, 0.0, -3.0, 2.5], vec![2, 4]);
        let y = tape.layer_norm(&x, &gain, &bias, 1e-12);
        for row in y.values.chunks(4) {
            let mu: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 4.0;
            assert!(mu.abs() < 1e-10, "row mean {mu}");
            assert!((var - 1.0).abs() < 1e-6, "row var {var}");
        }
    }

    #[test]
    fn backward_square() {
        // loss = x·x at x = 3 → d/dx = 6.
        let mut tape = Tape::new();
        let x = tape.leaf(vec![3.0], vec![1], true);
        let sq = tape.mul(&x, &x);
        let loss = tape.sum(&sq);
        tape.backward(&loss).unwrap();
        assert_close(tape.grad(&x).unwrap(), &[6.0], 1e-12);
    }

    #[test]
    fn backward_softmax_sum_is_zero() {
        // sum(softmax(v)) ≡ 1, so the gradient must vanish.
        let mut tape = Tape::new();
        let v = tape.leaf(vec![0.3, -1.0, 2.0, 0.7], vec![4], true);
        let y = tape.softmax(&v, 0);
        let loss = tape.sum(&y);
        tape.backward(&loss).unwrap();
        for g in tape.grad(&v).unwrap() {
            assert!(g.abs() < 1e-14, "gradient component {g}");
        }
    }

    #[test]
    fn backward_not_on_tape_is_state_error() {
        let mut tape = Tape::new();
        let detached = Tensor::scalar(1.0);
        assert!(matches!(tape.backward(&detached), Err(TensorError::NotOnTape)));

        let mut other = Tape::new();
        let foreign = other.leaf(vec![1.0], vec![1], true);
        assert!(matches!(tape.backward(&foreign), Err(TensorError::NotOnTape)));
    }

    #[test]
    fn backward_non_scalar_is_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(vec![1.0, 2.0], vec![2], true);
        assert!(matches!(tape.backward(&x), Err(TensorError::NotScalar { numel: 2 })));
    }

    #[test]
    fn straight_through_rows_are_one_hot() {
        let mut tape = Tape::new();
        let soft = tape.leaf(vec![0.2, 0.5, 0.3, 0.4, 0.4, 0.2], vec![2, 3], true);
        let hard = tape.straight_through(&soft);
        assert_close(&hard.values, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0], 0.0);
        for row in hard.values.chunks(3) {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            assert_eq!(row.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
        // Ties pick the lowest index (second row above: 0.4 vs 0.4 → index 0).
        let loss = tape.sum(&hard);
        tape.backward(&loss).unwrap();
        // Straight-through: gradient of sum is all ones at the soft input.
        assert_close(tape.grad(&soft).unwrap(), &[1.0; 6], 0.0);
    }

    #[test]
    fn gather_nll_uniform_is_log_vocab() {
        let mut tape = Tape::new();
        let logits = tape.leaf(vec![0.0; 2 * 10], vec![2, 10], true);
        let lp = tape.log_softmax(&logits, 1);
        let loss = tape.gather_nll(&lp, &[3, 7], &[true, true]).unwrap();
        assert!((loss.item() - 10.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gather_nll_known_probabilities() {
        // Two tokens with model probabilities 0.5 and 0.25 → (ln 2 + ln 4) / 2.
        let mut tape = Tape::new();
        let lp = Tensor::new(
            vec![0.5f64.ln(), 0.5f64.ln(), 0.25f64.ln(), 0.75f64.ln()],
            vec![2, 2],
        );
        let loss = tape.gather_nll(&lp, &[0, 0], &[true, true]).unwrap();
        let expect = (2.0f64.ln() + 4.0f64.ln()) / 2.0;
        assert!((loss.item() - expect).abs() < 1e-12);
    }

    #[test]
    fn gather_nll_no_valid_targets_is_error() {
        let mut tape = Tape::new();
        let lp = Tensor::new(vec![0.0; 4], vec![2, 2]);
        assert!(matches!(
            tape.gather_nll(&lp, &[0, 1], &[false, false]),
            Err(TensorError::NoValidTargets)
        ));
    }

    #[test]
    fn matmul_against_hand_example() {
        let mut tape = Tape::new();
        let a = Tensor::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![2, 3]);
        let b = Tensor::new(vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0], vec![3, 2]);
        let y = tape.matmul(&a, &b);
        assert_close(&y.values, &[58.0, 64.0, 139.0, 154.0], 1e-12);

        let bt = Tensor::new(vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0], vec![2, 3]);
        let y2 = tape.matmul_nt(&a, &bt);
        assert_close(&y2.values, &y.values, 1e-12);
    }

    #[test]
    fn gradient_accumulates_across_consumers() {
        // loss = (x * 2) + (x * 3) → dx = 5.
        let mut tape = Tape::new();
        let x = tape.leaf(vec![1.0], vec![1], true);
        let a = tape.scale(&x, 2.0);
        let b = tape.scale(&x, 3.0);
        let s = tape.add(&a, &b);
        let loss = tape.sum(&s);
        tape.backward(&loss).unwrap();
        assert_close(tape.grad(&x).unwrap(), &[5.0], 1e-15);
    }

    #[test]
    fn no_grad_leaves_stay_clean() {
        let mut tape = Tape::new();
        let frozen = tape.leaf(vec![2.0], vec![1], false);
        let x = tape.leaf(vec![3.0], vec![1], true);
        let y = tape.mul(&x, &frozen);
        let loss = tape.sum(&y);
        tape.backward(&loss).unwrap();
        assert!(tape.grad(&frozen).is_none());
        assert_close(tape.grad(&x).unwrap(), &[2.0], 1e-15);
    }

    #[test]
    fn concat_and_slice_roundtrip_gradients() {
        let mut tape = Tape::new();
        let a = tape.leaf(vec![1.0, 2.0], vec![1, 2], true);
        let b = tape.leaf(vec![3.0, 4.0], vec![1, 2], true);
        let cat = tape.concat(&[&a, &b], 1);
        assert_eq!(cat.shape, vec![1, 4]);
        let right = tape.slice(&cat, 1, 2, 2);
        let loss = tape.sum(&right);
        tape.backward(&loss).unwrap();
        assert_close(tape.grad(&a).unwrap(), &[0.0, 0.0], 0.0);
        assert_close(tape.grad(&b).unwrap(), &[1.0, 1.0], 0.0);
    }

    #[test]
    fn determinism_same_inputs_same_bits() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape.leaf(vec![0.1, -0.7, 0.3, 0.9, -0.2, 0.5], vec![2, 3], true);
            let w = tape.leaf(vec![0.4, -0.1, 0.2, 0.8, -0.6, 0.05], vec![3, 2], true);
            let h = tape.matmul(&x, &w);
            let s = tape.softmax(&h, 1);
            let loss = tape.mean(&s);
            tape.backward(&loss).unwrap();
            (loss.item(), tape.grad(&w).unwrap().to_vec())
        };
        let (l1, g1) = run();
        let (l2, g2) = run();
        assert_eq!(l1.to_bits(), l2.to_bits());
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
