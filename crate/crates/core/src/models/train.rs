use super::{Activation, Mlp};
use crate::error::{Error, Result};
use crate::numcore::{adam_update, AdamConfig, AdamState, DenseMatrix, Graph, NodeId, RngStream};
use serde::{Deserialize, Serialize};

/// Minibatch Adam settings shared by every network in the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, batch_size: 256, adam: AdamConfig::default(), hidden: vec![32, 32, 32] }
    }
}

impl TrainConfig {
    pub fn dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend_from_slice(&self.hidden);
        dims.push(output);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.adam.lr)));
        }
        Ok(())
    }
}

pub(crate) struct BatchOutcome {
    pub loss: NodeId,
    pub metrics: [f64; 2],
}

/// Shuffled minibatch Adam over `n` rows. Batches shorter than `min_batch`
/// are dropped; a `batch_size` below `min_batch` is rejected up front.
/// Returns per-epoch means of the two batch metrics.
pub(crate) fn run_minibatch(
    n: usize,
    min_batch: usize,
    cfg: &TrainConfig,
    stream: &mut RngStream,
    params: &mut [DenseMatrix],
    mut build: impl FnMut(&mut Graph, &[NodeId], &[usize]) -> Result<BatchOutcome>,
) -> Result<Vec<[f64; 2]>> {
    cfg.validate()?;
    if n < min_batch {
        return Err(Error::TooFewSamples { needed: min_batch, got: n });
    }
    if cfg.batch_size < min_batch {
        return Err(Error::InvalidConfig(format!("batch_size {} is below the minimum of {min_batch} rows", cfg.batch_size)));
    }
    let mut state = AdamState::new(params);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        stream.shuffle(&mut order);
        let mut sums = [0.0; 2];
        let mut batches = 0usize;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            if idx.len() < min_batch {
                continue;
            }
            let mut g = Graph::new();
            let nodes: Vec<NodeId> = params.iter().map(|p| g.parameter(p.clone())).collect();
            let out = build(&mut g, &nodes, idx)?;
            if !g.value(out.loss).item().is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            let grads = g.backward(out.loss)?;
            let adj: Vec<DenseMatrix> =
                nodes.iter().zip(params.iter()).map(|(&id, p)| grads.get_or_zeros(id, p)).collect();
            adam_update(params, &adj, &mut state, &cfg.adam)?;
            sums[0] += out.metrics[0];
            sums[1] += out.metrics[1];
            batches += 1;
        }
        let b = batches.max(1) as f64;
        trace.push([sums[0] / b, sums[1] / b]);
    }
    Ok(trace)
}

/// Mean squared error of `pred` against `target`, averaged over rows
/// (summed over columns).
pub(crate) fn mse_node(g: &mut Graph, pred: NodeId, target: NodeId) -> NodeId {
    let n = g.value(pred).rows() as f64;
    let diff = g.sub(pred, target);
    let sq = g.square(diff);
    let s = g.sum(sq);
    g.scale(s, 1.0 / n)
}

/// Plain MSE regression of `targets` on `inputs` with a LeakyReLU network.
/// Returns the network and its per-epoch training loss.
pub fn fit_regression(
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
    cfg: &TrainConfig,
    seed: u64,
    init_stream: u64,
) -> Result<(Mlp, Vec<f64>)> {
    if inputs.rows() != targets.rows() {
        return Err(Error::ShapeMismatch(format!("{} input rows vs {} target rows", inputs.rows(), targets.rows())));
    }
    let mut net = Mlp::init(&cfg.dims(inputs.cols(), targets.cols()), Activation::LeakyRelu, &mut RngStream::derived(seed, &[init_stream, 0]));
    let mut params = net.params();
    let mut stream = RngStream::derived(seed, &[init_stream, 1]);
    let trace = run_minibatch(inputs.rows(), 1, cfg, &mut stream, &mut params, |g, p, idx| {
        let x = g.constant(inputs.select_rows(idx));
        let y = g.constant(targets.select_rows(idx));
        let pred = net.forward_graph(g, x, p);
        let loss = mse_node(g, pred, y);
        let l = g.value(loss).item();
        Ok(BatchOutcome { loss, metrics: [l, 0.0] })
    })?;
    net.set_params(&params);
    Ok((net, trace.into_iter().map(|t| t[0]).collect()))
}
