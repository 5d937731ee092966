use crate::numcore::{DenseMatrix, Graph, NodeId, RngStream, LEAKY_SLOPE};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    fn apply_graph(self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Activation::LeakyRelu => g.leaky_relu(x, LEAKY_SLOPE),
            Activation::Tanh => g.tanh(x),
        }
    }
}

/// Feed-forward network; `activation` on hidden layers, identity on output.
///
/// Weights are stored `in × out` so a batch `X` (n × in) maps as `X·W + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpDoc", try_from = "MlpDoc")]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    weights: Vec<DenseMatrix>,
    biases: Vec<DenseMatrix>,
}

impl Mlp {
    /// Default initialization: weights and biases `Unif(±1/√fan_in)`.
    pub fn init(dims: &[usize], activation: Activation, stream: &mut RngStream) -> Self {
        Self::build(dims, activation, |fan_in, rows, cols, s| {
            let b = 1.0 / (fan_in as f64).sqrt();
            s.uniform_matrix(rows, cols, -b, b)
        }, stream)
    }

    /// Every weight and bias drawn i.i.d. from `Unif(lo, hi)`.
    pub fn uniform(dims: &[usize], activation: Activation, lo: f64, hi: f64, stream: &mut RngStream) -> Self {
        Self::build(dims, activation, |_, rows, cols, s| s.uniform_matrix(rows, cols, lo, hi), stream)
    }

    fn build(
        dims: &[usize],
        activation: Activation,
        mut draw: impl FnMut(usize, usize, usize, &mut RngStream) -> DenseMatrix,
        stream: &mut RngStream,
    ) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output dims");
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            weights.push(draw(w[0], w[0], w[1], stream));
            biases.push(draw(w[0], 1, w[1], stream));
        }
        Self { dims: dims.to_vec(), activation, weights, biases }
    }

    /// Assembles a network from explicit layers. Panics on inconsistent shapes.
    pub fn from_layers(activation: Activation, weights: Vec<DenseMatrix>, biases: Vec<DenseMatrix>) -> Self {
        assert!(!weights.is_empty() && weights.len() == biases.len(), "layer count mismatch");
        let mut dims = vec![weights[0].rows()];
        for (w, b) in weights.iter().zip(&biases) {
            assert_eq!(w.rows(), *dims.last().unwrap(), "layer input mismatch");
            assert_eq!(b.shape(), (1, w.cols()), "bias shape mismatch");
            dims.push(w.cols());
        }
        Self { dims, activation, weights, biases }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[DenseMatrix] {
        &self.biases
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Number of parameter tensors, `2 × layers`.
    pub fn tensor_count(&self) -> usize {
        2 * self.weights.len()
    }

    /// Parameter tensors in `[W0, b0, W1, b1, ...]` order.
    pub fn params(&self) -> Vec<DenseMatrix> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w.clone(), b.clone()]).collect()
    }

    pub fn set_params(&mut self, params: &[DenseMatrix]) {
        assert_eq!(params.len(), self.tensor_count(), "parameter tensor count mismatch");
        for (l, pair) in params.chunks(2).enumerate() {
            assert_eq!(pair[0].shape(), self.weights[l].shape());
            assert_eq!(pair[1].shape(), self.biases[l].shape());
            self.weights[l] = pair[0].clone();
            self.biases[l] = pair[1].clone();
        }
    }

    pub fn forward(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.cols(), self.input_dim(), "input width mismatch");
        let last = self.weights.len() - 1;
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.matmul(w).add_row(b);
            if l < last {
                h = h.map(|v| self.activation.apply(v));
            }
        }
        h
    }

    /// Forward pass on a graph, with `params` the bound tensors in
    /// [`Mlp::params`] order.
    pub fn forward_graph(&self, g: &mut Graph, x: NodeId, params: &[NodeId]) -> NodeId {
        assert_eq!(params.len(), self.tensor_count(), "bound parameter count mismatch");
        let last = self.weights.len() - 1;
        let mut h = x;
        for (l, pair) in params.chunks(2).enumerate() {
            let z = g.matmul(h, pair[0]);
            h = g.add_row(z, pair[1]);
            if l < last {
                h = self.activation.apply_graph(g, h);
            }
        }
        h
    }
}

/// JSON layout of one network: nested arrays of `f64`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpDoc {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub layers: Vec<LayerDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerDoc {
    /// `in × out`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl From<Mlp> for MlpDoc {
    fn from(m: Mlp) -> Self {
        MlpDoc::from(&m)
    }
}

impl From<&Mlp> for MlpDoc {
    fn from(m: &Mlp) -> Self {
        let layers = m
            .weights
            .iter()
            .zip(&m.biases)
            .map(|(w, b)| LayerDoc {
                weights: (0..w.rows()).map(|r| w.row(r).to_vec()).collect(),
                bias: b.as_slice().to_vec(),
            })
            .collect();
        Self { dims: m.dims.clone(), activation: m.activation, layers }
    }
}

impl TryFrom<MlpDoc> for Mlp {
    type Error = String;

    fn try_from(doc: MlpDoc) -> Result<Self, String> {
        if doc.dims.len() != doc.layers.len() + 1 {
            return Err(format!("{} dims for {} layers", doc.dims.len(), doc.layers.len()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, layer) in doc.layers.into_iter().enumerate() {
            let (i, o) = (doc.dims[l], doc.dims[l + 1]);
            if layer.weights.len() != i || layer.weights.iter().any(|r| r.len() != o) {
                return Err(format!("layers[{l}].weights is not {i}x{o}"));
            }
            if layer.bias.len() != o {
                return Err(format!("layers[{l}].bias has length {}, expected {o}", layer.bias.len()));
            }
            weights.push(DenseMatrix::from_rows(&layer.weights));
            biases.push(DenseMatrix::from_vec(1, o, layer.bias));
        }
        Ok(Mlp::from_layers(doc.activation, weights, biases))
    }
}
