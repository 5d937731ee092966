use super::train::{mse_node, run_minibatch, BatchOutcome};
use super::{fit_regression, residual_projection, residual_projection_graph, Activation, Mlp, MlpDoc, TrainConfig};
use crate::error::{Error, Result};
use crate::kernels::{gram, median_heuristic, mmr_statistic_streaming, KernelSpec};
use crate::numcore::{DenseMatrix, Graph, NodeId, RngStream};
use crate::scm::Observed;
use serde::{Deserialize, Serialize};

const TAG_BANDWIDTH: u64 = 0x20;
const TAG_INIT: u64 = 0x21;
const TAG_BATCHES: u64 = 0x22;
const TAG_ORACLE_ENC: u64 = 0x23;
const TAG_ORACLE_DEC: u64 = 0x24;

/// Per-epoch means of the batch reconstruction loss and batch MMR value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub reconstruction: f64,
    pub mmr: f64,
}

/// Encoder `φ: ℝᵐ → ℝᵈ` and decoder `η: ℝᵈ → ℝᵐ` trained on
/// `mean ‖x − η(φ(x))‖² + λ·Q̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDoc", try_from = "ModelDoc")]
pub struct AutoencoderModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub lambda: f64,
    /// Gaussian bandwidth frozen on the full training actions.
    pub bandwidth: f64,
    pub seed: u64,
    pub trace: Vec<TraceEntry>,
}

/// Graph handles for the encoder and decoder parameter tensors.
#[derive(Clone, Debug)]
pub struct BoundAutoencoder {
    pub encoder: Vec<NodeId>,
    pub decoder: Vec<NodeId>,
}

impl BoundAutoencoder {
    /// Splits a flat `[encoder..., decoder...]` parameter list.
    pub fn split(model: &AutoencoderModel, nodes: &[NodeId]) -> Self {
        let e = model.encoder.tensor_count();
        Self { encoder: nodes[..e].to_vec(), decoder: nodes[e..].to_vec() }
    }
}

/// Loss node of one batch and the values of its two terms.
#[derive(Clone, Copy, Debug)]
pub struct AeLoss {
    pub loss: NodeId,
    pub reconstruction: f64,
    pub mmr: f64,
}

/// Builds the autoencoder objective on a batch. Residuals of `φ(x)` on
/// `[1 | a]` come from the batch annihilator, so gradients flow through the
/// per-batch least-squares fit. The MMR term is dropped from the graph when
/// `λ = 0` but its value is still reported.
pub fn ae_loss_batch(
    g: &mut Graph,
    model: &AutoencoderModel,
    bound: &BoundAutoencoder,
    x: &DenseMatrix,
    a: &DenseMatrix,
    kernel: &KernelSpec,
) -> Result<AeLoss> {
    if x.rows() != a.rows() {
        return Err(Error::ShapeMismatch(format!("{} feature rows vs {} action rows", x.rows(), a.rows())));
    }
    let n = x.rows() as f64;
    let xn = g.constant(x.clone());
    let phi = model.encoder.forward_graph(g, xn, &bound.encoder);
    let xhat = model.decoder.forward_graph(g, phi, &bound.decoder);
    let recon = mse_node(g, xhat, xn);

    let r = residual_projection_graph(g, phi, a)?;
    let k = g.constant(gram(a, kernel).into_matrix());
    let qf = g.quad_form(r, k);
    let q = g.scale(qf, 1.0 / (n * n));

    let reconstruction = g.value(recon).item();
    let mmr = g.value(q).item();
    let loss = if model.lambda > 0.0 {
        let pen = g.scale(q, model.lambda);
        g.add(recon, pen)
    } else {
        recon
    };
    Ok(AeLoss { loss, reconstruction, mmr })
}

impl AutoencoderModel {
    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    fn params(&self) -> Vec<DenseMatrix> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    fn set_params(&mut self, p: &[DenseMatrix]) {
        let e = self.encoder.tensor_count();
        self.encoder.set_params(&p[..e]);
        self.decoder.set_params(&p[e..]);
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::gaussian(self.bandwidth)
    }

    pub fn encode(&self, x: &DenseMatrix) -> DenseMatrix {
        self.encoder.forward(x)
    }

    pub fn reconstruct(&self, x: &DenseMatrix) -> DenseMatrix {
        self.decoder.forward(&self.encode(x))
    }

    /// Full-sample `mean ‖x − η(φ(x))‖²`.
    pub fn reconstruction_loss(&self, x: &DenseMatrix) -> f64 {
        self.reconstruct(x).sub(x).frobenius_sq() / x.rows() as f64
    }

    /// Full-sample `Q̂` of the encoder residuals on `[1 | a]`.
    pub fn mmr_value(&self, a: &DenseMatrix, x: &DenseMatrix) -> Result<f64> {
        let (_, r) = residual_projection(&self.encode(x), a)?;
        Ok(mmr_statistic_streaming(a, &r, &self.kernel()?))
    }

    /// Full-sample objective `reconstruction + λ·Q̂`.
    pub fn objective(&self, a: &DenseMatrix, x: &DenseMatrix) -> Result<f64> {
        Ok(self.reconstruction_loss(x) + self.lambda * self.mmr_value(a, x)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Trains an autoencoder with latent width `d`.
///
/// With `init`, optimisation starts from its parameters (warm start);
/// otherwise from a fresh default initialization. The kernel bandwidth is
/// the median heuristic on all of `data.a` and is kept fixed.
pub fn train_autoencoder(
    data: Observed<'_>,
    d: usize,
    lambda: f64,
    cfg: &TrainConfig,
    init: Option<&AutoencoderModel>,
    seed: u64,
) -> Result<AutoencoderModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be a finite non-negative number, got {lambda}")));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("latent dimension must be positive".into()));
    }
    let (a, x) = (data.a, data.x);
    if a.rows() != x.rows() {
        return Err(Error::ShapeMismatch(format!("{} action rows vs {} feature rows", a.rows(), x.rows())));
    }
    let k = a.cols();
    let m = x.cols();
    let bandwidth = median_heuristic(a, &mut RngStream::derived(seed, &[TAG_BANDWIDTH]))?;
    let kernel = KernelSpec::gaussian(bandwidth)?;

    let mut model = match init {
        Some(init) => {
            if init.input_dim() != m || init.latent_dim() != d {
                return Err(Error::ShapeMismatch(format!(
                    "warm start has shape {}→{}, expected {m}→{d}",
                    init.input_dim(),
                    init.latent_dim()
                )));
            }
            AutoencoderModel { lambda, bandwidth, seed, trace: Vec::new(), ..init.clone() }
        }
        None => {
            let mut s = RngStream::derived(seed, &[TAG_INIT]);
            let encoder = Mlp::init(&cfg.dims(m, d), Activation::LeakyRelu, &mut s);
            let decoder = Mlp::init(&cfg.dims(d, m), Activation::LeakyRelu, &mut s);
            AutoencoderModel { encoder, decoder, lambda, bandwidth, seed, trace: Vec::new() }
        }
    };

    let mut params = model.params();
    let mut stream = RngStream::derived(seed, &[TAG_BATCHES]);
    let arch = model.clone();
    // A batch must leave residual degrees of freedom after fitting [1 | A].
    let trace = run_minibatch(a.rows(), k + 2, cfg, &mut stream, &mut params, |g, nodes, idx| {
        let bound = BoundAutoencoder::split(&arch, nodes);
        let out = ae_loss_batch(g, &arch, &bound, &x.select_rows(idx), &a.select_rows(idx), &kernel)?;
        Ok(BatchOutcome { loss: out.loss, metrics: [out.reconstruction, out.mmr] })
    })?;
    model.set_params(&params);
    model.trace = trace.into_iter().map(|[reconstruction, mmr]| TraceEntry { reconstruction, mmr }).collect();
    Ok(model)
}

/// Supervised start for the oracle variant: the encoder regresses the true
/// latent `z` on `x` and the decoder maps `z` back to `x`. Returns a `λ = 0`
/// model meant as `init` for [`train_autoencoder`].
pub fn pretrain_oracle(data: Observed<'_>, z: &DenseMatrix, cfg: &TrainConfig, seed: u64) -> Result<AutoencoderModel> {
    let bandwidth = median_heuristic(data.a, &mut RngStream::derived(seed, &[TAG_BANDWIDTH]))?;
    let (encoder, _) = fit_regression(data.x, z, cfg, seed, TAG_ORACLE_ENC)?;
    let (decoder, _) = fit_regression(z, data.x, cfg, seed, TAG_ORACLE_DEC)?;
    Ok(AutoencoderModel { encoder, decoder, lambda: 0.0, bandwidth, seed, trace: Vec::new() })
}

/// JSON layout of a trained autoencoder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDoc {
    pub architecture: ArchitectureDoc,
    pub encoder: MlpDoc,
    pub decoder: MlpDoc,
    pub lambda: f64,
    pub bandwidth: f64,
    pub seed: u64,
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArchitectureDoc {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_dims: Vec<usize>,
    pub decoder_dims: Vec<usize>,
    pub activation: Activation,
}

impl From<AutoencoderModel> for ModelDoc {
    fn from(m: AutoencoderModel) -> Self {
        ModelDoc {
            architecture: ArchitectureDoc {
                input_dim: m.input_dim(),
                latent_dim: m.latent_dim(),
                encoder_dims: m.encoder.dims().to_vec(),
                decoder_dims: m.decoder.dims().to_vec(),
                activation: m.encoder.activation(),
            },
            encoder: MlpDoc::from(&m.encoder),
            decoder: MlpDoc::from(&m.decoder),
            lambda: m.lambda,
            bandwidth: m.bandwidth,
            seed: m.seed,
            trace: m.trace,
        }
    }
}

impl TryFrom<ModelDoc> for AutoencoderModel {
    type Error = String;

    fn try_from(doc: ModelDoc) -> std::result::Result<Self, String> {
        let encoder = Mlp::try_from(doc.encoder).map_err(|e| format!("encoder.{e}"))?;
        let decoder = Mlp::try_from(doc.decoder).map_err(|e| format!("decoder.{e}"))?;
        let arch = &doc.architecture;
        if encoder.dims() != arch.encoder_dims.as_slice() || decoder.dims() != arch.decoder_dims.as_slice() {
            return Err("architecture does not match layer shapes".into());
        }
        if encoder.output_dim() != decoder.input_dim() || decoder.output_dim() != encoder.input_dim() {
            return Err("encoder and decoder shapes are incompatible".into());
        }
        if arch.input_dim != encoder.input_dim() || arch.latent_dim != encoder.output_dim() {
            return Err("architecture input_dim/latent_dim mismatch".into());
        }
        Ok(AutoencoderModel {
            encoder,
            decoder,
            lambda: doc.lambda,
            bandwidth: doc.bandwidth,
            seed: doc.seed,
            trace: doc.trace,
        })
    }
}
