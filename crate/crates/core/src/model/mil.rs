//! The end-to-end bag classifier.
//!
//! bag `X` -> instance encoder -> adjacency learning layer -> graph
//! convolution stack (optionally batch-normalized) -> graph pooling -> MLP
//! head -> logit.
//!
//! Parameters are registered, and therefore drawn from the seeded stream, in
//! this order: `encoder.{i}`, `adj.mlp1`, `adj.mlp2`, `conv.{i}`, `bn.{i}`,
//! `pool.gate` (attention pooling only), `head.{i}`.

use crate::data::{Bag, Standardization};
use crate::diffcore::{sigmoid, ParamStore, Parameter, Rng, Tensor};
use crate::error::{Error, Result};
use crate::graphcore::DenseGraph;
use crate::layers::{
    dropout, simple_pool, Activation, AdjacencyLearner, AttentionPool, BatchNorm, ChebConv, Dense, GraphConv,
    PoolMode, SageConv,
};

use super::{ConvKind, ModelConfig};

/// Forward-pass mode. Training samples dropout masks from the given stream
/// and uses per-bag batch statistics.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Differentiable outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logit: Tensor,
    pub pooled: Tensor,
    pub attention: Option<Tensor>,
    pub adjacency: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub prob: f64,
    pub logit: f64,
    pub attention: Option<Vec<f64>>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Pooling {
    Simple(PoolMode),
    Attention(AttentionPool),
}

#[derive(Debug, Clone)]
pub struct MilModel {
    pub config: ModelConfig,
    pub input_dim: usize,
    /// Feature standardization fitted on the training bags, applied to every
    /// bag passed to [`MilModel::predict_bag`].
    pub standardization: Option<Standardization>,
    params: ParamStore,
    encoder: Vec<Dense>,
    adjacency: AdjacencyLearner,
    convs: Vec<GraphConv>,
    norms: Vec<BatchNorm>,
    pooling: Pooling,
    head: Vec<Dense>,
}

/// Build a freshly initialized model. Weights are Glorot-uniform, biases
/// zero, batch-norm scale one, all drawn in registration order from `rng`.
pub fn build_model(config: &ModelConfig, input_dim: usize, rng: &mut Rng) -> Result<MilModel> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::config("input_dim", "must be positive"));
    }
    let mut params = ParamStore::new();

    let mut width = input_dim;
    let mut encoder = Vec::with_capacity(config.encoder_dims.len());
    for (i, &out) in config.encoder_dims.iter().enumerate() {
        encoder.push(Dense::new(&mut params, &format!("encoder.{i}"), width, out, rng)?);
        width = out;
    }

    let adjacency = AdjacencyLearner::new(
        &mut params,
        "adj",
        width,
        config.adjacency_hidden,
        config.adjacency_dim,
        config.context,
        config.adjacency_scale,
        rng,
    )?;

    let mut convs = Vec::with_capacity(config.conv_layers);
    for i in 0..config.conv_layers {
        let prefix = format!("conv.{i}");
        let conv = match config.conv {
            ConvKind::Cheb => GraphConv::Cheb(ChebConv::new(
                &mut params,
                &prefix,
                width,
                config.conv_hidden,
                config.cheb_k,
                config.lambda_max_mode,
                rng,
            )?),
            ConvKind::Sage => GraphConv::Sage(SageConv::new(&mut params, &prefix, width, config.conv_hidden, rng)?),
        };
        convs.push(conv);
        width = config.conv_hidden;
    }

    let norms = if config.batchnorm {
        (0..config.conv_layers)
            .map(|i| BatchNorm::new(&mut params, &format!("bn.{i}"), config.conv_hidden))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let pooling = match config.pooling {
        PoolMode::Attention => Pooling::Attention(AttentionPool::new(&mut params, "pool", width, rng)?),
        mode => Pooling::Simple(mode),
    };

    let mut head = Vec::with_capacity(config.head_dims.len() + 1);
    for (i, &out) in config.head_dims.iter().chain(std::iter::once(&1)).enumerate() {
        head.push(Dense::new(&mut params, &format!("head.{i}"), width, out, rng)?);
        width = out;
    }

    Ok(MilModel {
        config: config.clone(),
        input_dim,
        standardization: None,
        params,
        encoder,
        adjacency,
        convs,
        norms,
        pooling,
        head,
    })
}

impl MilModel {
    pub fn params(&self) -> &[Parameter] {
        self.params.as_slice()
    }

    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.params.get(name)
    }

    pub fn trainable(&self) -> impl Iterator<Item = &Parameter> {
        self.params.trainable()
    }

    pub fn num_trainable_values(&self) -> usize {
        self.trainable().map(|p| p.tensor.len()).sum()
    }

    pub fn attention_gate(&self) -> Option<&Dense> {
        match &self.pooling {
            Pooling::Attention(a) => Some(&a.gate),
            Pooling::Simple(_) => None,
        }
    }

    pub fn forward(&self, x: &Tensor, mode: &mut Mode<'_>) -> Result<ForwardOutput> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape {
                op: "predict_bag",
                lhs: x.shape(),
                rhs: (x.rows(), self.input_dim),
            });
        }
        let p = self.config.dropout_p;
        let mut h = x.clone();
        for layer in &self.encoder {
            h = layer.forward(&h, Activation::Relu)?;
            h = self.dropout(&h, p, mode)?;
        }

        let adjacency = self.adjacency.forward(&h)?;
        for (i, conv) in self.convs.iter().enumerate() {
            let graph = DenseGraph::new(h, adjacency.clone())?;
            // Normalizing after the ReLU would make mean pooling of the
            // last layer constant (every feature has bag mean beta).
            h = match self.norms.get(i) {
                Some(bn) => bn.forward(&conv.pre_activation(&graph)?, mode.is_training())?.relu(),
                None => conv.forward(&graph)?,
            };
        }

        let (pooled, attention) = match &self.pooling {
            Pooling::Simple(m) => (simple_pool(&h, *m)?, None),
            Pooling::Attention(a) => {
                let (r, alpha) = a.forward(&h)?;
                (r, Some(alpha))
            }
        };

        let mut z = pooled.clone();
        let last = self.head.len() - 1;
        for (i, layer) in self.head.iter().enumerate() {
            if i < last {
                z = layer.forward(&z, Activation::Relu)?;
                z = self.dropout(&z, p, mode)?;
            } else {
                z = layer.forward(&z, Activation::None)?;
            }
        }
        Ok(ForwardOutput {
            logit: z,
            pooled,
            attention,
            adjacency,
        })
    }

    fn dropout(&self, h: &Tensor, p: f64, mode: &mut Mode<'_>) -> Result<Tensor> {
        match mode {
            Mode::Train(rng) => dropout(h, p, rng, true),
            Mode::Eval => Ok(h.clone()),
        }
    }

    /// Score one bag. In evaluation mode the result is deterministic and does
    /// not depend on instance order.
    pub fn predict_bag(&self, bag: &Bag, mode: &mut Mode<'_>) -> Result<Prediction> {
        let x = match &self.standardization {
            Some(stats) => stats.apply(bag).to_tensor(),
            None => bag.to_tensor(),
        };
        let out = self.forward(&x, mode)?;
        let logit = out.logit.item();
        Ok(Prediction {
            prob: sigmoid(logit),
            logit,
            attention: out.attention.map(|a| a.to_vec()),
            embedding: out.pooled.to_vec(),
        })
    }

    pub fn predict(&self, bag: &Bag) -> Result<Prediction> {
        self.predict_bag(bag, &mut Mode::Eval)
    }
}

/// Numerically stable binary cross-entropy on a `1 x 1` logit.
pub fn bce_loss(logit: &Tensor, label: u8) -> Result<Tensor> {
    logit.bce_with_logits(f64::from(label))
}
