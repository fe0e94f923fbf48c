//! Tape-based reverse-mode differentiation over rank-2 tensors.
//!
//! A [`Graph`] records every forward op as a node. Parameters enter the graph
//! by reference (no copy); [`Graph::backward`] walks the tape in reverse and
//! returns the gradient of a scalar loss with respect to every node.

use std::collections::HashMap;

use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc};
use super::{NumericsError, ParamId, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Stack along rows (time).
    Rows,
    /// Stack along columns (features).
    Cols,
}

enum Value<'a> {
    Owned(Tensor),
    Borrowed(&'a Tensor),
}

impl Value<'_> {
    fn get(&self) -> &Tensor {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

enum Op {
    Leaf,
    Param,
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>, Axis),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    SoftmaxRows(NodeId),
    MaxPoolTime {
        input: NodeId,
        argmax: Vec<usize>,
    },
    MeanAll(NodeId),
    SumAll(NodeId),
    Center(NodeId),
    L1Pairwise(NodeId, NodeId),
    LstmCell(Box<LstmCellOp>),
    StackStates {
        states: Vec<NodeId>,
        width: usize,
    },
    Unfold {
        input: NodeId,
        kernel: usize,
    },
    CrossEntropy {
        logits: NodeId,
        target: usize,
        probs: Vec<f64>,
    },
}

struct LstmCellOp {
    input: NodeId,
    row: usize,
    prev: Option<NodeId>,
    w_ih: NodeId,
    w_hh: NodeId,
    bias: NodeId,
    /// Post-activation gates `[i, f, g, o]` followed by `tanh(c)`.
    cache: Vec<f64>,
}

struct Node<'a> {
    value: Value<'a>,
    op: Op,
}

/// Gradients of a scalar loss with respect to every node of a graph.
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    pub fn wrt(&self, node: NodeId) -> Option<&Tensor> {
        self.nodes[node.0].as_ref()
    }

    /// Parameter gradients, in the order parameters entered the graph.
    /// Parameters that do not influence the loss are omitted.
    pub fn params(&self) -> Vec<(ParamId, Tensor)> {
        self.params
            .iter()
            .filter_map(|&(id, node)| self.nodes[node].clone().map(|g| (id, g)))
            .collect()
    }

    pub fn into_params(mut self) -> Vec<(ParamId, Tensor)> {
        let mut out = Vec::with_capacity(self.params.len());
        for &(id, node) in &self.params {
            if let Some(g) = self.nodes[node].take() {
                out.push((id, g));
            }
        }
        out
    }
}

pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    param_nodes: HashMap<ParamId, NodeId>,
    param_order: Vec<(ParamId, usize)>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> NumericsError {
    NumericsError::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            param_order: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0].value.get()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<NodeId, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite(name));
        }
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Constant input (gradients are still reported for it).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Leaf,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Borrows a parameter into the graph. Repeated calls return the same
    /// node, so gradients from every use accumulate on it.
    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        self.nodes.push(Node {
            value: Value::Borrowed(store.value(id)),
            op: Op::Param,
        });
        let node = NodeId(self.nodes.len() - 1);
        self.param_nodes.insert(id, node);
        self.param_order.push((id, node.0));
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; n * m];
        gemm_acc(ta.data(), tb.data(), &mut out, n, k, m);
        let value = Tensor::matrix(n, m, out)?;
        self.push(value, Op::MatMul(a, b), "matmul")
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(shape_err("matmul_t", ta, tb));
        }
        let (n, k, m) = (ta.rows(), ta.cols(), tb.rows());
        let mut out = vec![0.0; n * m];
        gemm_nt_acc(ta.data(), tb.data(), &mut out, n, k, m);
        let value = Tensor::matrix(n, m, out)?;
        self.push(value, Op::MatMulT(a, b), "matmul_t")
    }

    /// Elementwise sum. `b` may also be a `1 × cols` row (broadcast over
    /// rows) or a `1 × 1` scalar.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let cols = ta.cols();
        let data: Vec<f64> = if ta.shape() == tb.shape() {
            ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect()
        } else if tb.rows() == 1 && tb.cols() == cols {
            let row = tb.data();
            ta.data()
                .iter()
                .enumerate()
                .map(|(i, x)| x + row[i % cols])
                .collect()
        } else if tb.len() == 1 {
            let s = tb.item();
            ta.data().iter().map(|x| x + s).collect()
        } else {
            return Err(shape_err("add", ta, tb));
        };
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(value, Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("elementwise_mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(value, Op::Mul(a, b), "elementwise_mul")
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId, NumericsError> {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor), "scale")
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: Axis) -> Result<NodeId, NumericsError> {
        let first = self.value(
            *parts
                .first()
                .ok_or_else(|| NumericsError::InvalidTensor("concat of zero tensors".into()))?,
        );
        let value = match axis {
            Axis::Rows => {
                let cols = first.cols();
                let mut data = Vec::new();
                let mut rows = 0;
                for &p in parts {
                    let t = self.value(p);
                    if t.cols() != cols {
                        return Err(shape_err("concat", first, t));
                    }
                    rows += t.rows();
                    data.extend_from_slice(t.data());
                }
                Tensor::matrix(rows, cols, data)?
            }
            Axis::Cols => {
                let rows = first.rows();
                let mut cols = 0;
                for &p in parts {
                    let t = self.value(p);
                    if t.rows() != rows {
                        return Err(shape_err("concat", first, t));
                    }
                    cols += t.cols();
                }
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row(r));
                    }
                }
                Tensor::matrix(rows, cols, data)?
            }
        };
        self.push(value, Op::Concat(parts.to_vec(), axis), "concat")
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a), "relu")
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a), "sigmoid")
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a), "tanh")
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let t = self.value(a);
        let mut value = t.clone();
        for r in 0..t.rows() {
            softmax_in_place(value.row_mut(r));
        }
        self.push(value, Op::SoftmaxRows(a), "softmax")
    }

    /// Per-column maximum over rows (`t × d → 1 × d`). Ties go to the
    /// lowest row index.
    pub fn max_pool_time(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let t = self.value(a);
        let cols = t.cols();
        let mut best = t.row(0).to_vec();
        let mut argmax = vec![0; cols];
        for r in 1..t.rows() {
            for (c, &v) in t.row(r).iter().enumerate() {
                if v > best[c] {
                    best[c] = v;
                    argmax[c] = r;
                }
            }
        }
        let value = Tensor::row_vector(best);
        self.push(value, Op::MaxPoolTime { input: a, argmax }, "max_pool_over_time")
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let t = self.value(a);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        self.push(value, Op::MeanAll(a), "mean_all")
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(value, Op::SumAll(a), "sum_all")
    }

    /// `x − mean(x)` with the mean taken over every entry.
    pub fn center(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let t = self.value(a);
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        let value = t.map(|x| x - mean);
        self.push(value, Op::Center(a), "center")
    }

    /// `out[i][j] = Σ_k |a[i][k] − b[j][k]|` for `a: n×d`, `b: m×d`.
    pub fn l1_pairwise(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(shape_err("l1_pairwise_distance", ta, tb));
        }
        let (n, m) = (ta.rows(), tb.rows());
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let ra = ta.row(i);
            for j in 0..m {
                out.push(ra.iter().zip(tb.row(j)).map(|(x, y)| (x - y).abs()).sum());
            }
        }
        let value = Tensor::matrix(n, m, out)?;
        self.push(value, Op::L1Pairwise(a, b), "l1_pairwise_distance")
    }

    /// One step of a classic LSTM cell on row `row` of `input`.
    ///
    /// `prev` is the previous step's output (or `None` for the zero state).
    /// Weights: `w_ih: in × 4H`, `w_hh: H × 4H`, `bias: 1 × 4H`, gate order
    /// `[input, forget, candidate, output]`. The result is the `1 × 2H`
    /// state `[h; c]`.
    pub fn lstm_cell(
        &mut self,
        input: NodeId,
        row: usize,
        prev: Option<NodeId>,
        w_ih: NodeId,
        w_hh: NodeId,
        bias: NodeId,
    ) -> Result<NodeId, NumericsError> {
        let (tx, twi, twh, tb) = (
            self.value(input),
            self.value(w_ih),
            self.value(w_hh),
            self.value(bias),
        );
        let hidden = twh.rows();
        let four = 4 * hidden;
        if twi.rows() != tx.cols() || twi.cols() != four {
            return Err(shape_err("lstm_cell", tx, twi));
        }
        if twh.cols() != four || tb.len() != four {
            return Err(shape_err("lstm_cell", twh, tb));
        }
        if row >= tx.rows() {
            return Err(NumericsError::InvalidTensor(format!(
                "lstm_cell row {row} out of range for {:?}",
                tx.shape()
            )));
        }
        let mut z = tb.data().to_vec();
        gemm_acc(tx.row(row), twi.data(), &mut z, 1, tx.cols(), four);
        let zero_state;
        let state = match prev {
            Some(p) => {
                let t = self.value(p);
                if t.cols() != 2 * hidden {
                    return Err(shape_err("lstm_cell", t, twh));
                }
                t.data()
            }
            None => {
                zero_state = vec![0.0; 2 * hidden];
                &zero_state[..]
            }
        };
        let (h_prev, c_prev) = state.split_at(hidden);
        gemm_acc(h_prev, twh.data(), &mut z, 1, hidden, four);

        let mut cache = vec![0.0; 5 * hidden];
        let mut out = vec![0.0; 2 * hidden];
        for j in 0..hidden {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hidden + j]);
            let g = z[2 * hidden + j].tanh();
            let o = sigmoid(z[3 * hidden + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            cache[j] = i;
            cache[hidden + j] = f;
            cache[2 * hidden + j] = g;
            cache[3 * hidden + j] = o;
            cache[4 * hidden + j] = tc;
            out[j] = o * tc;
            out[hidden + j] = c;
        }
        let value = Tensor::row_vector(out);
        let op = Op::LstmCell(Box::new(LstmCellOp {
            input,
            row,
            prev,
            w_ih,
            w_hh,
            bias,
            cache,
        }));
        self.push(value, op, "lstm_cell")
    }

    /// Stacks the first `width` columns of each `1 × n` state into a
    /// `len × width` matrix (row `i` from `states[i]`).
    pub fn stack_states(&mut self, states: &[NodeId], width: usize) -> Result<NodeId, NumericsError> {
        let mut data = Vec::with_capacity(states.len() * width);
        for &s in states {
            let t = self.value(s);
            if t.rows() != 1 || t.cols() < width {
                return Err(NumericsError::InvalidTensor(format!(
                    "stack_states needs 1 × ≥{width} rows, got {:?}",
                    t.shape()
                )));
            }
            data.extend_from_slice(&t.data()[..width]);
        }
        let value = Tensor::matrix(states.len(), width, data)?;
        self.push(
            value,
            Op::StackStates {
                states: states.to_vec(),
                width,
            },
            "stack_states",
        )
    }

    /// Sliding windows over time: `t × d → (t' − k + 1) × (k·d)` where
    /// `t' = max(t, k)`; rows past the end are zero padding.
    pub fn unfold_time(&mut self, a: NodeId, kernel: usize) -> Result<NodeId, NumericsError> {
        let t = self.value(a);
        if kernel == 0 {
            return Err(NumericsError::InvalidTensor("kernel length 0".into()));
        }
        let (rows, d) = (t.rows(), t.cols());
        let positions = rows.max(kernel) - kernel + 1;
        let mut data = vec![0.0; positions * kernel * d];
        for p in 0..positions {
            for k in 0..kernel {
                let src = p + k;
                if src < rows {
                    let dst = p * kernel * d + k * d;
                    data[dst..dst + d].copy_from_slice(t.row(src));
                }
            }
        }
        let value = Tensor::matrix(positions, kernel * d, data)?;
        self.push(value, Op::Unfold { input: a, kernel }, "unfold_time")
    }

    /// `−log softmax(logits)[target]` for a `1 × D` logit row.
    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId, NumericsError> {
        let t = self.value(logits);
        if t.rows() != 1 || target >= t.cols() {
            return Err(NumericsError::InvalidTensor(format!(
                "cross_entropy target {target} for logits {:?}",
                t.shape()
            )));
        }
        let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + t.data().iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let loss = lse - t.data()[target];
        let probs = t.data().iter().map(|x| (x - lse).exp()).collect();
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                target,
                probs,
            },
            "cross_entropy",
        )
    }

    /// Reverse pass from a `1 × 1` loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NumericsError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(NumericsError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(lt.shape().to_vec(), vec![1.0])?);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            nodes: grads,
            params: self.param_order.clone(),
        })
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let out = node.value.get();
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
                let ga = slot(grads, *a, ta);
                gemm_nt_acc(g.data(), tb.data(), ga.data_mut(), n, m, k);
                let gb = slot(grads, *b, tb);
                gemm_tn_acc(ta.data(), g.data(), gb.data_mut(), n, k, m);
            }
            Op::MatMulT(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.rows(), ta.cols(), tb.rows());
                let ga = slot(grads, *a, ta);
                gemm_acc(g.data(), tb.data(), ga.data_mut(), n, m, k);
                let gb = slot(grads, *b, tb);
                gemm_tn_acc(g.data(), ta.data(), gb.data_mut(), n, m, k);
            }
            Op::Add(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                slot(grads, *a, ta).add_assign(g);
                let gb = slot(grads, *b, tb);
                if ta.shape() == tb.shape() {
                    gb.add_assign(g);
                } else if tb.rows() == 1 && tb.cols() == ta.cols() {
                    let cols = tb.cols();
                    for (i, v) in g.data().iter().enumerate() {
                        gb.data_mut()[i % cols] += v;
                    }
                } else {
                    gb.data_mut()[0] += g.data().iter().sum::<f64>();
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ga = slot(grads, *a, ta);
                for ((o, gv), bv) in ga.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                    *o += gv * bv;
                }
                let gb = slot(grads, *b, tb);
                for ((o, gv), av) in gb.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                    *o += gv * av;
                }
            }
            Op::Scale(a, factor) => {
                let ga = slot(grads, *a, self.value(*a));
                for (o, gv) in ga.data_mut().iter_mut().zip(g.data()) {
                    *o += gv * factor;
                }
            }
            Op::Concat(parts, axis) => match axis {
                Axis::Rows => {
                    let mut offset = 0;
                    for &p in parts {
                        let t = self.value(p);
                        let n = t.len();
                        let gp = slot(grads, p, t);
                        for (o, gv) in gp.data_mut().iter_mut().zip(&g.data()[offset..offset + n]) {
                            *o += gv;
                        }
                        offset += n;
                    }
                }
                Axis::Cols => {
                    let mut col = 0;
                    for &p in parts {
                        let t = self.value(p);
                        let w = t.cols();
                        let gp = slot(grads, p, t);
                        for r in 0..g.rows() {
                            let src = &g.row(r)[col..col + w];
                            for (o, gv) in gp.row_mut(r).iter_mut().zip(src) {
                                *o += gv;
                            }
                        }
                        col += w;
                    }
                }
            },
            Op::Relu(a) => {
                let ta = self.value(*a);
                let ga = slot(grads, *a, ta);
                for ((o, gv), x) in ga.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                    if *x > 0.0 {
                        *o += gv;
                    }
                }
            }
            Op::Sigmoid(a) => {
                let ga = slot(grads, *a, self.value(*a));
                for ((o, gv), y) in ga.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                    *o += gv * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let ga = slot(grads, *a, self.value(*a));
                for ((o, gv), y) in ga.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                    *o += gv * (1.0 - y * y);
                }
            }
            Op::SoftmaxRows(a) => {
                let ga = slot(grads, *a, self.value(*a));
                for r in 0..out.rows() {
                    let (y, gy) = (out.row(r), g.row(r));
                    let dot: f64 = y.iter().zip(gy).map(|(p, q)| p * q).sum();
                    for ((o, yv), gv) in ga.row_mut(r).iter_mut().zip(y).zip(gy) {
                        *o += yv * (gv - dot);
                    }
                }
            }
            Op::MaxPoolTime { input, argmax } => {
                let ga = slot(grads, *input, self.value(*input));
                for (c, &r) in argmax.iter().enumerate() {
                    let v = ga.get(r, c) + g.data()[c];
                    ga.set(r, c, v);
                }
            }
            Op::MeanAll(a) => {
                let ta = self.value(*a);
                let share = g.item() / ta.len() as f64;
                slot(grads, *a, ta)
                    .data_mut()
                    .iter_mut()
                    .for_each(|o| *o += share);
            }
            Op::SumAll(a) => {
                let gv = g.item();
                slot(grads, *a, self.value(*a))
                    .data_mut()
                    .iter_mut()
                    .for_each(|o| *o += gv);
            }
            Op::Center(a) => {
                let mean_g = g.data().iter().sum::<f64>() / g.len() as f64;
                let ga = slot(grads, *a, self.value(*a));
                for (o, gv) in ga.data_mut().iter_mut().zip(g.data()) {
                    *o += gv - mean_g;
                }
            }
            Op::L1Pairwise(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, m, d) = (ta.rows(), tb.rows(), ta.cols());
                let mut da = vec![0.0; n * d];
                let mut db = vec![0.0; m * d];
                for i in 0..n {
                    let ra = ta.row(i);
                    for j in 0..m {
                        let gv = g.get(i, j);
                        if gv == 0.0 {
                            continue;
                        }
                        let rb = tb.row(j);
                        for k in 0..d {
                            let diff = ra[k] - rb[k];
                            let s = if diff > 0.0 {
                                gv
                            } else if diff < 0.0 {
                                -gv
                            } else {
                                0.0
                            };
                            da[i * d + k] += s;
                            db[j * d + k] -= s;
                        }
                    }
                }
                for (o, v) in slot(grads, *a, ta).data_mut().iter_mut().zip(&da) {
                    *o += v;
                }
                for (o, v) in slot(grads, *b, tb).data_mut().iter_mut().zip(&db) {
                    *o += v;
                }
            }
            Op::LstmCell(cell) => self.backprop_lstm(cell, out, g, grads),
            Op::StackStates { states, width } => {
                for (r, &s) in states.iter().enumerate() {
                    let gs = slot(grads, s, self.value(s));
                    for (o, gv) in gs.data_mut()[..*width].iter_mut().zip(g.row(r)) {
                        *o += gv;
                    }
                }
            }
            Op::Unfold { input, kernel } => {
                let ti = self.value(*input);
                let (rows, d) = (ti.rows(), ti.cols());
                let gi = slot(grads, *input, ti);
                for p in 0..g.rows() {
                    let grow = g.row(p);
                    for k in 0..*kernel {
                        let src = p + k;
                        if src < rows {
                            for (o, gv) in gi.row_mut(src).iter_mut().zip(&grow[k * d..(k + 1) * d]) {
                                *o += gv;
                            }
                        }
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                target,
                probs,
            } => {
                let gv = g.item();
                let gl = slot(grads, *logits, self.value(*logits));
                for (c, (o, p)) in gl.data_mut().iter_mut().zip(probs).enumerate() {
                    let onehot = if c == *target { 1.0 } else { 0.0 };
                    *o += gv * (p - onehot);
                }
            }
        }
    }

    fn backprop_lstm(&self, cell: &LstmCellOp, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let twh = self.value(cell.w_hh);
        let hidden = twh.rows();
        let four = 4 * hidden;
        let tx = self.value(cell.input);
        let in_dim = tx.cols();
        let cache = &cell.cache;
        let zero_state = vec![0.0; 2 * hidden];
        let state = match cell.prev {
            Some(p) => self.value(p).data(),
            None => &zero_state[..],
        };
        let (h_prev, c_prev) = state.split_at(hidden);
        let (dh, dc_out) = g.data().split_at(hidden);
        let c_new = &out.data()[hidden..];

        let mut dz = vec![0.0; four];
        let mut dc_prev = vec![0.0; hidden];
        for j in 0..hidden {
            let (i, f, gg, o, tc) = (
                cache[j],
                cache[hidden + j],
                cache[2 * hidden + j],
                cache[3 * hidden + j],
                cache[4 * hidden + j],
            );
            debug_assert!((tc - c_new[j].tanh()).abs() < 1e-12);
            let d_o = dh[j] * tc;
            let dc = dc_out[j] + dh[j] * o * (1.0 - tc * tc);
            let di = dc * gg;
            let dg = dc * i;
            let df = dc * c_prev[j];
            dc_prev[j] = dc * f;
            dz[j] = di * i * (1.0 - i);
            dz[hidden + j] = df * f * (1.0 - f);
            dz[2 * hidden + j] = dg * (1.0 - gg * gg);
            dz[3 * hidden + j] = d_o * o * (1.0 - o);
        }

        let x = tx.row(cell.row);
        let twi = self.value(cell.w_ih);
        {
            let gwi = slot(grads, cell.w_ih, twi);
            gemm_tn_acc(x, &dz, gwi.data_mut(), 1, in_dim, four);
        }
        {
            let gwh = slot(grads, cell.w_hh, twh);
            gemm_tn_acc(h_prev, &dz, gwh.data_mut(), 1, hidden, four);
        }
        {
            let gb = slot(grads, cell.bias, self.value(cell.bias));
            for (o, v) in gb.data_mut().iter_mut().zip(&dz) {
                *o += v;
            }
        }
        {
            let gx = slot(grads, cell.input, tx);
            gemm_nt_acc(&dz, twi.data(), gx.row_mut(cell.row), 1, four, in_dim);
        }
        if let Some(p) = cell.prev {
            let mut dh_prev = vec![0.0; hidden];
            gemm_nt_acc(&dz, twh.data(), &mut dh_prev, 1, four, hidden);
            let gp = slot(grads, p, self.value(p));
            let data = gp.data_mut();
            for j in 0..hidden {
                data[j] += dh_prev[j];
                data[hidden + j] += dc_prev[j];
            }
        }
    }
}

fn slot<'g>(grads: &'g mut [Option<Tensor>], id: NodeId, like: &Tensor) -> &'g mut Tensor {
    grads[id.0].get_or_insert_with(|| {
        Tensor::new(like.shape().to_vec(), vec![0.0; like.len()]).expect("valid shape")
    })
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn fixed_points() {
        let mut g = Graph::new();
        let x = g.input(m(1, 3, &[0.0, 0.0, -1.0]));
        let s = g.sigmoid(x).unwrap();
        let t = g.tanh(x).unwrap();
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(s).data()[0], 0.5);
        assert_eq!(g.value(t).data()[0], 0.0);
        assert_eq!(g.value(r).data()[2], 0.0);
    }

    #[test]
    fn matmul_identity() {
        let mut g = Graph::new();
        let a = g.input(m(2, 2, &[1., 2., 3., 4.]));
        let i = g.input(m(2, 2, &[1., 0., 0., 1.]));
        let p = g.matmul(a, i).unwrap();
        assert_eq!(g.value(p).data(), &[1., 2., 3., 4.]);
    }

    #[test]
    fn l1_distance_example() {
        let mut g = Graph::new();
        let a = g.input(m(1, 2, &[0., 0.]));
        let b = g.input(m(1, 2, &[3., -4.]));
        let d = g.l1_pairwise(a, b).unwrap();
        assert_eq!(g.value(d).item(), 7.0);
    }

    #[test]
    fn shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(2, 3));
        let b = g.input(Tensor::zeros(2, 3));
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(matches!(err, NumericsError::Shape { .. }));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(2, 2));
        let r = g.relu(a).unwrap();
        assert!(matches!(g.backward(r), Err(NumericsError::NonScalarLoss(_))));
    }

    #[test]
    fn linear_gradient_is_input() {
        // loss = sum(W·x) ⇒ ∂loss/∂W[i][j] = x[i] (W: 3×2, x as 1×3 row).
        let mut store = ParamStore::new();
        let w = store.insert("w", m(3, 2, &[0.1, -0.2, 0.3, 0.4, -0.5, 0.6]));
        let mut g = Graph::new();
        let x = g.input(m(1, 3, &[1.0, 2.0, -3.0]));
        let wn = g.param(&store, w);
        let y = g.matmul(x, wn).unwrap();
        let loss = g.sum_all(y).unwrap();
        let grads = g.backward(loss).unwrap().into_params();
        assert_eq!(grads[0].1.data(), &[1.0, 1.0, 2.0, 2.0, -3.0, -3.0]);
    }

    #[test]
    fn reused_parameter_accumulates() {
        // loss = sum(w ⊙ x) + sum(w ⊙ y) ⇒ grad = x + y
        let mut store = ParamStore::new();
        let w = store.insert("w", m(1, 2, &[0.5, -1.5]));
        let mut g = Graph::new();
        let x = g.input(m(1, 2, &[1.0, 2.0]));
        let y = g.input(m(1, 2, &[10.0, 20.0]));
        let w1 = g.param(&store, w);
        let a = g.mul(w1, x).unwrap();
        let w2 = g.param(&store, w);
        let b = g.mul(w2, y).unwrap();
        let s = g.add(a, b).unwrap();
        let loss = g.sum_all(s).unwrap();
        let grads = g.backward(loss).unwrap().into_params();
        assert_eq!(grads.len(), 1);
        assert_eq!(grads[0].1.data(), &[11.0, 22.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g.input(m(2, 3, &[1.0, 2.0, 3.0, -500.0, 0.0, 500.0]));
        let s = g.softmax(x).unwrap();
        for r in 0..2 {
            let row = g.value(s).row(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p > 0.0 || r == 1));
        }
    }

    #[test]
    fn max_pool_ties_route_to_lowest_index() {
        let mut g = Graph::new();
        let x = g.input(m(3, 2, &[1.0, 5.0, 3.0, 5.0, 3.0, 2.0]));
        let p = g.max_pool_time(x).unwrap();
        assert_eq!(g.value(p).data(), &[3.0, 5.0]);
        let loss = g.sum_all(p).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[0., 1., 1., 0., 0., 0.]);
    }

    #[test]
    fn unfold_pads_short_inputs() {
        let mut g = Graph::new();
        let x = g.input(m(3, 1, &[1.0, 2.0, 3.0]));
        let u = g.unfold_time(x, 5).unwrap();
        assert_eq!(g.value(u).shape(), &[1, 5]);
        assert_eq!(g.value(u).data(), &[1., 2., 3., 0., 0.]);
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut g = Graph::new();
        let x = g.input(m(1, 1, &[1e200]));
        let y = g.input(m(1, 1, &[1e200]));
        assert!(matches!(g.mul(x, y), Err(NumericsError::NonFinite(_))));
    }
}
