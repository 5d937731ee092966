//! Reverse-mode differentiation over an append-only computation graph.
//!
//! Values are computed eagerly when a node is created. Every node records
//! whether any parameter lies upstream of it; backward skips the rest.

use super::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Parameter,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// n×c plus a 1×c row broadcast over rows.
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    LeakyRelu(NodeId, f64),
    Tanh(NodeId),
    Square(NodeId),
    Mean(NodeId),
    Sum(NodeId),
    Scale(NodeId, f64),
    /// Σ_c r_cᵀ K r_c over the columns of r.
    QuadForm { r: NodeId, k: NodeId },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: DenseMatrix,
    tracked: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Adjoints indexed by node; `None` where no gradient flows.
pub struct Gradients {
    adjoints: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&DenseMatrix> {
        self.adjoints[id.0].as_ref()
    }

    /// Adjoint of `id`, or zeros shaped like `like` when nothing flowed into it.
    pub fn get_or_zeros(&self, id: NodeId, like: &DenseMatrix) -> DenseMatrix {
        self.get(id).cloned().unwrap_or_else(|| DenseMatrix::zeros(like.rows(), like.cols()))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: DenseMatrix, tracked: bool) -> NodeId {
        self.nodes.push(Node { op, value, tracked });
        NodeId(self.nodes.len() - 1)
    }

    fn tracked(&self, id: NodeId) -> bool {
        self.nodes[id.0].tracked
    }

    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    pub fn parameter(&mut self, value: DenseMatrix) -> NodeId {
        self.push(Op::Parameter, value, true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        let t = self.tracked(a) || self.tracked(b);
        self.push(Op::MatMul(a, b), v, t)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        let t = self.tracked(a) || self.tracked(b);
        self.push(Op::Add(a, b), v, t)
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let v = self.value(a).add_row(self.value(bias));
        let t = self.tracked(a) || self.tracked(bias);
        self.push(Op::AddRow(a, bias), v, t)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).sub(self.value(b));
        let t = self.tracked(a) || self.tracked(b);
        self.push(Op::Sub(a, b), v, t)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let t = self.tracked(a);
        self.push(Op::LeakyRelu(a, slope), v, t)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        let t = self.tracked(a);
        self.push(Op::Tanh(a), v, t)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        let t = self.tracked(a);
        self.push(Op::Square(a), v, t)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = DenseMatrix::scalar(self.value(a).mean());
        let t = self.tracked(a);
        self.push(Op::Mean(a), v, t)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = DenseMatrix::scalar(self.value(a).sum());
        let t = self.tracked(a);
        self.push(Op::Sum(a), v, t)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).scale(s);
        let t = self.tracked(a);
        self.push(Op::Scale(a, s), v, t)
    }

    /// `Σ_c r_cᵀ K r_c`; `k` must be square with as many rows as `r`.
    pub fn quad_form(&mut self, r: NodeId, k: NodeId) -> NodeId {
        let rv = self.value(r);
        let kv = self.value(k);
        assert_eq!(kv.rows(), kv.cols(), "quad_form kernel must be square");
        assert_eq!(kv.rows(), rv.rows(), "quad_form row mismatch");
        let kr = kv.matmul(rv);
        let v = DenseMatrix::scalar(rv.hadamard(&kr).sum());
        let t = self.tracked(r) || self.tracked(k);
        self.push(Op::QuadForm { r, k }, v, t)
    }

    /// Reverse sweep from `loss`, visiting each node at most once in reverse
    /// creation order.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::NonScalarLoss { rows: lv.rows(), cols: lv.cols() });
        }
        let mut adj: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(DenseMatrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            match node.op {
                Op::Constant | Op::Parameter => {}
                Op::MatMul(a, b) => {
                    if self.tracked(a) {
                        let ga = g.matmul_nt(self.value(b));
                        accumulate(&mut adj, a, ga);
                    }
                    if self.tracked(b) {
                        let gb = self.value(a).matmul_tn(&g);
                        accumulate(&mut adj, b, gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.tracked(a) {
                        accumulate(&mut adj, a, g.clone());
                    }
                    if self.tracked(b) {
                        accumulate(&mut adj, b, g.clone());
                    }
                }
                Op::AddRow(a, bias) => {
                    if self.tracked(bias) {
                        accumulate(&mut adj, bias, g.col_sums());
                    }
                    if self.tracked(a) {
                        accumulate(&mut adj, a, g.clone());
                    }
                }
                Op::Sub(a, b) => {
                    if self.tracked(b) {
                        accumulate(&mut adj, b, g.scale(-1.0));
                    }
                    if self.tracked(a) {
                        accumulate(&mut adj, a, g.clone());
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    let ga = self.value(a).zip_map(&g, |x, gi| if x > 0.0 { gi } else { slope * gi });
                    accumulate(&mut adj, a, ga);
                }
                Op::Tanh(a) => {
                    let ga = node.value.zip_map(&g, |y, gi| (1.0 - y * y) * gi);
                    accumulate(&mut adj, a, ga);
                }
                Op::Square(a) => {
                    let ga = self.value(a).zip_map(&g, |x, gi| 2.0 * x * gi);
                    accumulate(&mut adj, a, ga);
                }
                Op::Mean(a) => {
                    let av = self.value(a);
                    let s = g.item() / (av.rows() * av.cols()) as f64;
                    accumulate(&mut adj, a, DenseMatrix::filled(av.rows(), av.cols(), s));
                }
                Op::Sum(a) => {
                    let av = self.value(a);
                    accumulate(&mut adj, a, DenseMatrix::filled(av.rows(), av.cols(), g.item()));
                }
                Op::Scale(a, s) => {
                    accumulate(&mut adj, a, g.scale(s));
                }
                Op::QuadForm { r, k } => {
                    let gs = g.item();
                    let rv = self.value(r);
                    let kv = self.value(k);
                    if self.tracked(r) {
                        // (K + Kᵀ) r
                        let mut gr = kv.matmul(rv);
                        gr.gemm_acc(kv, true, rv, false);
                        accumulate(&mut adj, r, gr.scale(gs));
                    }
                    if self.tracked(k) {
                        accumulate(&mut adj, k, rv.matmul_nt(rv).scale(gs));
                    }
                }
            }
            // Parameters keep their adjoint for the caller.
            if matches!(node.op, Op::Parameter) {
                adj[idx] = Some(g);
            }
        }
        Ok(Gradients { adjoints: adj })
    }
}

fn accumulate(adj: &mut [Option<DenseMatrix>], id: NodeId, g: DenseMatrix) {
    match &mut adj[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
