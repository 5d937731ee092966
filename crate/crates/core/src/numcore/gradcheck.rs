//! Random computation graphs and a central finite-difference comparison.
//!
//! A [`GraphPlan`] is a seeded, shape-consistent program over every op kind
//! the graph supports; it can be replayed with perturbed parameters, which is
//! what the finite-difference side needs.

use super::{DenseMatrix, Graph, NodeId, RngStream};
use crate::error::Result;

#[derive(Clone, Debug)]
enum Step {
    Param(usize),
    Constant(DenseMatrix),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    AddRow(usize, usize),
    LeakyRelu(usize, f64),
    Tanh(usize),
    Square(usize),
    Scale(usize, f64),
    Mean(usize),
    Sum(usize),
    QuadForm(usize, usize),
}

/// A replayable random program ending in a scalar.
#[derive(Clone, Debug)]
pub struct GraphPlan {
    steps: Vec<Step>,
    shapes: Vec<(usize, usize)>,
    /// Initial parameter values.
    pub params: Vec<DenseMatrix>,
}

struct Builder<'a> {
    steps: Vec<Step>,
    shapes: Vec<(usize, usize)>,
    params: Vec<DenseMatrix>,
    s: &'a mut RngStream,
}

impl Builder<'_> {
    fn push(&mut self, step: Step, shape: (usize, usize)) -> usize {
        self.steps.push(step);
        self.shapes.push(shape);
        self.steps.len() - 1
    }

    fn pick(&mut self, n: usize) -> usize {
        (self.s.next_u64() % n as u64) as usize
    }

    fn param(&mut self, r: usize, c: usize) -> usize {
        let v = self.s.uniform_matrix(r, c, -1.0, 1.0);
        self.params.push(v);
        let i = self.params.len() - 1;
        self.push(Step::Param(i), (r, c))
    }

    fn constant(&mut self, r: usize, c: usize) -> usize {
        let v = self.s.uniform_matrix(r, c, -1.0, 1.0);
        self.push(Step::Constant(v), (r, c))
    }

    /// A leaf of the given shape, usually a parameter.
    fn leaf(&mut self, r: usize, c: usize) -> usize {
        if self.pick(4) == 0 {
            self.constant(r, c)
        } else {
            self.param(r, c)
        }
    }

    fn with_shape(&mut self, shape: (usize, usize)) -> Option<usize> {
        let c: Vec<usize> = (0..self.shapes.len()).filter(|&i| self.shapes[i] == shape && !self.is_scalar_reduction(i)).collect();
        if c.is_empty() {
            None
        } else {
            Some(c[self.pick(c.len())])
        }
    }

    fn is_scalar_reduction(&self, i: usize) -> bool {
        matches!(self.steps[i], Step::Mean(_) | Step::Sum(_) | Step::QuadForm(..))
    }
}

impl GraphPlan {
    /// Draws a program of about `ops` operations on `n`-row matrices.
    pub fn random(seed: u64, ops: usize) -> Self {
        let mut s = RngStream::derived(seed, &[0x60]);
        let mut b = Builder { steps: vec![], shapes: vec![], params: vec![], s: &mut s };
        let n = 2 + b.pick(4);
        let width = 1 + b.pick(4);
        let mut cur = b.leaf(n, width);
        // Guarantee at least one parameter reaches the loss.
        let first = b.param(n, width);
        cur = b.push(Step::Add(cur, first), (n, width));
        for _ in 0..ops {
            let (r, c) = b.shapes[cur];
            cur = match b.pick(9) {
                0 => {
                    let k = 1 + b.pick(4);
                    let w = b.leaf(c, k);
                    b.push(Step::MatMul(cur, w), (r, k))
                }
                1 => {
                    let other = b.with_shape((r, c)).filter(|&o| o != cur).unwrap_or_else(|| b.leaf(r, c));
                    b.push(Step::Add(cur, other), (r, c))
                }
                2 => {
                    let other = b.with_shape((r, c)).filter(|&o| o != cur).unwrap_or_else(|| b.leaf(r, c));
                    b.push(Step::Sub(other, cur), (r, c))
                }
                3 => {
                    let bias = b.leaf(1, c);
                    b.push(Step::AddRow(cur, bias), (r, c))
                }
                4 => {
                    let slope = b.s.uniform(0.01, 0.3);
                    b.push(Step::LeakyRelu(cur, slope), (r, c))
                }
                5 => b.push(Step::Tanh(cur), (r, c)),
                6 => {
                    let t = b.push(Step::Tanh(cur), (r, c));
                    b.push(Step::Square(t), (r, c))
                }
                7 => {
                    let k = b.s.uniform(-1.5, 1.5);
                    b.push(Step::Scale(cur, k), (r, c))
                }
                _ => {
                    // Reuse an earlier node so adjoints accumulate over fan-out.
                    let other = b.with_shape((r, c)).unwrap_or(cur);
                    b.push(Step::Add(cur, other), (r, c))
                }
            };
        }
        let (r, _) = b.shapes[cur];
        let head = match b.pick(3) {
            0 => b.push(Step::Sum(cur), (1, 1)),
            1 => b.push(Step::Mean(cur), (1, 1)),
            _ => {
                let k = if b.pick(2) == 0 { b.param(r, r) } else { b.constant(r, r) };
                b.push(Step::QuadForm(cur, k), (1, 1))
            }
        };
        // Adding the mean of an earlier node exercises scalar addition and
        // gives intermediate nodes a second path to the loss.
        let earlier: Vec<usize> = (0..cur).filter(|&i| !b.is_scalar_reduction(i)).collect();
        let extra = earlier[b.pick(earlier.len())];
        let tail = b.push(Step::Mean(extra), (1, 1));
        b.push(Step::Add(head, tail), (1, 1));
        GraphPlan { steps: b.steps, shapes: b.shapes, params: b.params }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Builds the graph with the given parameter values; returns the loss
    /// node and the parameter nodes in declaration order.
    pub fn build(&self, g: &mut Graph, params: &[DenseMatrix]) -> (NodeId, Vec<NodeId>) {
        let mut ids: Vec<NodeId> = Vec::with_capacity(self.steps.len());
        let mut pids = vec![None; params.len()];
        for step in &self.steps {
            let id = match step {
                Step::Param(i) => {
                    let id = g.parameter(params[*i].clone());
                    pids[*i] = Some(id);
                    id
                }
                Step::Constant(v) => g.constant(v.clone()),
                Step::MatMul(a, b) => g.matmul(ids[*a], ids[*b]),
                Step::Add(a, b) => g.add(ids[*a], ids[*b]),
                Step::Sub(a, b) => g.sub(ids[*a], ids[*b]),
                Step::AddRow(a, b) => g.add_row(ids[*a], ids[*b]),
                Step::LeakyRelu(a, s) => g.leaky_relu(ids[*a], *s),
                Step::Tanh(a) => g.tanh(ids[*a]),
                Step::Square(a) => g.square(ids[*a]),
                Step::Scale(a, s) => g.scale(ids[*a], *s),
                Step::Mean(a) => g.mean(ids[*a]),
                Step::Sum(a) => g.sum(ids[*a]),
                Step::QuadForm(r, k) => g.quad_form(ids[*r], ids[*k]),
            };
            ids.push(id);
        }
        debug_assert_eq!(self.shapes.last(), Some(&(1, 1)));
        (*ids.last().expect("non-empty plan"), pids.into_iter().map(|p| p.expect("every parameter is placed")).collect())
    }

    pub fn loss(&self, params: &[DenseMatrix]) -> f64 {
        let mut g = Graph::new();
        let (l, _) = self.build(&mut g, params);
        g.value(l).item()
    }

    /// Op-kind names present in the plan.
    pub fn op_kinds(&self) -> Vec<&'static str> {
        let mut k: Vec<&'static str> = self
            .steps
            .iter()
            .map(|s| match s {
                Step::Param(_) => "parameter",
                Step::Constant(_) => "constant",
                Step::MatMul(..) => "matmul",
                Step::Add(..) => "add",
                Step::Sub(..) => "sub",
                Step::AddRow(..) => "add_row",
                Step::LeakyRelu(..) => "leaky_relu",
                Step::Tanh(_) => "tanh",
                Step::Square(_) => "square",
                Step::Scale(..) => "scale",
                Step::Mean(_) => "mean",
                Step::Sum(_) => "sum",
                Step::QuadForm(..) => "quad_form",
            })
            .collect();
        k.sort_unstable();
        k.dedup();
        k
    }
}

/// Outcome of one gradient comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest elementwise `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub entries: usize,
}

/// Central differences with step `h` against the reverse sweep, for every
/// parameter entry of `plan`.
pub fn check_plan(plan: &GraphPlan, h: f64, floor: f64) -> Result<GradCheck> {
    let mut g = Graph::new();
    let (loss, pids) = plan.build(&mut g, &plan.params);
    let grads = g.backward(loss)?;
    let mut worst = 0.0f64;
    let mut entries = 0;
    let mut params = plan.params.clone();
    for (pi, &id) in pids.iter().enumerate() {
        let analytic = grads.get_or_zeros(id, &plan.params[pi]);
        for e in 0..params[pi].as_slice().len() {
            let orig = params[pi].as_slice()[e];
            params[pi].as_mut_slice()[e] = orig + h;
            let up = plan.loss(&params);
            params[pi].as_mut_slice()[e] = orig - h;
            let down = plan.loss(&params);
            params[pi].as_mut_slice()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.as_slice()[e];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(floor));
            entries += 1;
        }
    }
    Ok(GradCheck { max_rel_error: worst, entries })
}
