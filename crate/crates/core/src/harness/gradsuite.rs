//! Gradient checks for every differentiable building block and for complete
//! models, shared by the `gradcheck` subcommand and the test suite.

use crate::diffcore::{grad_check, GradCheckReport, ParamStore, Rng, Tensor};
use crate::error::Result;
use crate::graphcore::{cheb_basis, normalized_laplacian, scale_laplacian, DenseGraph, LambdaMaxMode};
use crate::layers::{
    simple_pool, Activation, AdjacencyLearner, AttentionPool, BatchNorm, ChebConv, ContextMode, Dense, PoolMode,
    SageConv,
};
use crate::model::{bce_loss, build_model, ConvKind, ModelConfig, Mode};

/// Bound for layers and whole models.
pub const LAYER_TOLERANCE: f64 = 1e-3;
const MAX_DRAWS: usize = 50;

/// Bound for smooth elementwise and linear-algebra primitives.
pub const SMOOTH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCase {
    pub name: String,
    /// Checked against [`SMOOTH_TOLERANCE`] instead of [`LAYER_TOLERANCE`].
    pub smooth: bool,
    pub report: GradCheckReport,
    /// Coordinates whose analytic gradient is nonzero. A check over all-zero
    /// gradients would pass vacuously.
    pub active: usize,
    pub coordinates: usize,
}

impl GradCase {
    pub fn tolerance(&self) -> f64 {
        if self.smooth {
            SMOOTH_TOLERANCE
        } else {
            LAYER_TOLERANCE
        }
    }

    pub fn passed(&self) -> bool {
        self.report.max_rel_error < self.tolerance()
    }
}

fn random(rng: &mut Rng, r: usize, c: usize, scale: f64) -> Tensor {
    Tensor::param(r, c, (0..r * c).map(|_| scale * rng.normal()).collect()).expect("shape")
}

/// Fixed random projection turning any output into a scalar loss, so every
/// output coordinate carries a distinct weight.
fn probe(rng: &mut Rng, t: &Tensor) -> Tensor {
    let (r, c) = t.shape();
    Tensor::constant(r, c, (0..r * c).map(|_| rng.normal()).collect()).expect("shape")
}

fn project(out: Tensor, weights: &Tensor) -> Result<Tensor> {
    Ok(out.mul(weights)?.sum_all())
}

/// Check `f` against a probe drawn once from its first output.
fn case(
    name: &str,
    smooth: bool,
    rng: &mut Rng,
    inputs: &[Tensor],
    f: impl Fn() -> Result<Tensor>,
) -> Result<GradCase> {
    let weights = probe(rng, &f()?);
    checked_case(name, smooth, inputs, || project(f()?, &weights))
}

fn checked_case(name: &str, smooth: bool, inputs: &[Tensor], loss: impl Fn() -> Result<Tensor>) -> Result<GradCase> {
    let report = grad_check(&loss, inputs, None)?;
    inputs.iter().for_each(Tensor::zero_grad);
    loss()?.backward()?;
    let active = inputs
        .iter()
        .map(|t| t.grad().iter().filter(|g| g.abs() > 1e-12).count())
        .sum();
    inputs.iter().for_each(Tensor::zero_grad);
    Ok(GradCase {
        name: name.to_string(),
        smooth,
        report,
        active,
        coordinates: inputs.iter().map(Tensor::len).sum(),
    })
}

/// Symmetric positive adjacency built from a free parameter, so that single
/// coordinate perturbations keep it symmetric.
fn adjacency_from(b: &Tensor) -> Tensor {
    b.gram().sigmoid()
}

pub fn primitive_cases(rng: &mut Rng) -> Result<Vec<GradCase>> {
    let a = random(rng, 4, 3, 1.0);
    let b = random(rng, 3, 5, 1.0);
    let row = random(rng, 1, 3, 1.0);
    let col = random(rng, 4, 1, 1.0);
    let pos = Tensor::param(4, 3, (0..12).map(|_| rng.uniform(0.5, 2.0)).collect())?;
    let v = random(rng, 6, 1, 1.0);
    let z = random(rng, 1, 1, 2.0);
    let basis = random(rng, 4, 2, 0.7);
    let x = random(rng, 4, 3, 1.0);

    let mut out = vec![
        case("matmul", true, rng, &[a.clone(), b.clone()], || a.matmul(&b))?,
        case("gram", true, rng, &[a.clone()], || Ok(a.gram()))?,
        case("transpose", true, rng, &[a.clone()], || Ok(a.transpose()))?,
        case("add_row_broadcast", true, rng, &[a.clone(), row.clone()], || a.add(&row))?,
        case("sub_row_broadcast", true, rng, &[a.clone(), row.clone()], || a.sub(&row))?,
        case("mul", true, rng, &[a.clone(), pos.clone()], || a.mul(&pos))?,
        case("mul_row_broadcast", true, rng, &[a.clone(), row.clone()], || a.mul(&row))?,
        case("mul_col_broadcast", true, rng, &[a.clone(), col.clone()], || a.mul(&col))?,
        case("concat_cols", true, rng, &[a.clone(), pos.clone()], || a.concat_cols(&pos))?,
        case("scale", true, rng, &[a.clone()], || Ok(a.scale(-1.7).div_scalar(3.0).add_scalar(0.2)))?,
        case("repeat_rows", true, rng, &[row.clone()], || row.repeat_rows(4))?,
        case("sum_rows", true, rng, &[a.clone()], || Ok(a.sum_rows()))?,
        case("mean_rows", true, rng, &[a.clone()], || Ok(a.mean_rows()))?,
        case("sum_cols", true, rng, &[a.clone()], || Ok(a.sum_cols()))?,
        case("sigmoid", true, rng, &[a.clone()], || Ok(a.sigmoid()))?,
        case("tanh", true, rng, &[a.clone()], || Ok(a.tanh()))?,
        case("ln", true, rng, &[pos.clone()], || Ok(pos.ln()))?,
        case("square", true, rng, &[a.clone()], || Ok(a.square()))?,
        case("powf", true, rng, &[pos.clone()], || Ok(pos.powf(-0.5)))?,
        case("sqrt", true, rng, &[pos.clone()], || Ok(pos.sqrt()))?,
        case("div", true, rng, &[a.clone(), pos.clone()], || a.div(&pos))?,
        case("softmax", true, rng, &[v.clone()], || v.softmax())?,
        case("bce_positive", true, rng, &[z.clone()], || z.bce_with_logits(1.0))?,
        case("bce_negative", true, rng, &[z.clone()], || z.bce_with_logits(0.0))?,
        case("normalized_laplacian", true, rng, &[basis.clone()], || {
            normalized_laplacian(&adjacency_from(&basis))
        })?,
    ];
    for k in [1, 2, 3, 5, 7] {
        let name = format!("cheb_basis_k{k}");
        out.push(case(&name, true, rng, &[basis.clone(), x.clone()], || {
            let l = scale_laplacian(&normalized_laplacian(&adjacency_from(&basis))?, 2.0)?;
            let z = cheb_basis(&l, &x, k)?;
            let mut acc = z[0].clone();
            for t in &z[1..] {
                acc = acc.concat_cols(t)?;
            }
            Ok(acc)
        })?);
    }
    Ok(out)
}

fn trainable(store: &ParamStore) -> Vec<Tensor> {
    store.trainable().map(|p| p.tensor.clone()).collect()
}

pub fn layer_cases(rng: &mut Rng) -> Result<Vec<GradCase>> {
    let (n, d) = (5, 4);
    let x = random(rng, n, d, 1.0);
    let basis = random(rng, n, 3, 0.7);
    let mut out = Vec::new();

    for (act, name) in [(Activation::None, "dense_linear"), (Activation::Relu, "dense_relu")] {
        let mut store = ParamStore::new();
        let layer = Dense::new(&mut store, "dense", d, 3, rng)?;
        let mut inputs = trainable(&store);
        inputs.push(x.clone());
        out.push(case(name, false, rng, &inputs, || layer.forward(&x, act))?);
    }

    for (mode, name) in [
        (ContextMode::Mean, "adjacency_mean_context"),
        (ContextMode::Sum, "adjacency_sum_context"),
        (ContextMode::Max, "adjacency_max_context"),
    ] {
        let mut store = ParamStore::new();
        let layer = AdjacencyLearner::new(&mut store, "adj", d, 6, 3, mode, true, rng)?;
        let mut inputs = trainable(&store);
        inputs.push(x.clone());
        out.push(case(name, false, rng, &inputs, || layer.forward(&x))?);
    }

    for k in [3, 5, 7] {
        let mut store = ParamStore::new();
        let layer = ChebConv::new(&mut store, "conv", d, 3, k, LambdaMaxMode::Fixed2, rng)?;
        let mut inputs = trainable(&store);
        inputs.push(x.clone());
        inputs.push(basis.clone());
        out.push(case(&format!("cheb_conv_k{k}"), false, rng, &inputs, || {
            layer.forward(&DenseGraph::new(x.clone(), adjacency_from(&basis))?)
        })?);
    }

    {
        let mut store = ParamStore::new();
        let layer = SageConv::new(&mut store, "sage", d, 3, rng)?;
        let mut inputs = trainable(&store);
        inputs.push(x.clone());
        inputs.push(basis.clone());
        out.push(case("sage_conv", false, rng, &inputs, || {
            layer.forward(&DenseGraph::new(x.clone(), adjacency_from(&basis))?)
        })?);
    }

    {
        let mut store = ParamStore::new();
        let layer = BatchNorm::new(&mut store, "bn", d)?;
        let gamma = store.get("bn.gamma").expect("registered").tensor.clone();
        gamma.set_data(&(0..d).map(|_| rng.uniform(0.5, 1.5)).collect::<Vec<_>>())?;
        let mut inputs = trainable(&store);
        inputs.push(x.clone());
        out.push(case("batchnorm_training", false, rng, &inputs, || layer.forward(&x, true))?);
        out.push(case("batchnorm_eval", false, rng, &[x.clone()], || layer.forward(&x, false))?);
    }

    {
        let mut store = ParamStore::new();
        let layer = AttentionPool::new(&mut store, "pool", d, rng)?;
        let mut inputs = trainable(&store);
        inputs.push(x.clone());
        out.push(case("attention_pool", false, rng, &inputs, || Ok(layer.forward(&x)?.0))?);
        out.push(case("attention_weights", false, rng, &inputs, || Ok(layer.forward(&x)?.1))?);
    }

    for mode in [PoolMode::Mean, PoolMode::Max, PoolMode::Add] {
        let name = format!("{}_pool", mode.as_str());
        out.push(case(&name, false, rng, &[x.clone()], || simple_pool(&x, mode))?);
    }
    Ok(out)
}

/// Small end-to-end models: both convolution families with every pooling
/// mode, with and without batch normalization. Dropout is disabled and the
/// loss is the training loss of one bag.
pub fn model_cases(rng: &mut Rng) -> Result<Vec<GradCase>> {
    let (n, d) = (5, 3);
    let x = random(rng, n, d, 1.0);
    let mut out = Vec::new();
    for conv in [ConvKind::Cheb, ConvKind::Sage] {
        for pooling in PoolMode::ALL {
            for batchnorm in [false, true] {
                let config = ModelConfig {
                    conv,
                    cheb_k: 3,
                    conv_layers: 2,
                    encoder_dims: vec![6],
                    conv_hidden: 5,
                    adjacency_hidden: 4,
                    adjacency_dim: 3,
                    pooling,
                    batchnorm,
                    dropout_p: 0.0,
                    head_dims: vec![6],
                    ..ModelConfig::default()
                };
                let label = u8::from(out.len() % 2 == 0);
                let name = format!(
                    "model_{}_{}",
                    config.architecture_name().to_lowercase().replace([' ', '-'], "_"),
                    pooling.as_str()
                );
                // Tiny random networks can start with every ReLU of a layer
                // dead. Redraw until most coordinates carry gradient.
                let mut attempt = 0;
                let case = loop {
                    let model = build_model(&config, d, rng)?;
                    let mut inputs: Vec<Tensor> = model.trainable().map(|p| p.tensor.clone()).collect();
                    inputs.push(x.clone());
                    let loss = || {
                        // Training mode (batch statistics) with dropout off.
                        let fwd = model.forward(&x, &mut Mode::Train(&mut Rng::new(0)))?;
                        bce_loss(&fwd.logit, label)
                    };
                    let case = checked_case(&name, false, &inputs, loss)?;
                    attempt += 1;
                    if 2 * case.active >= case.coordinates || attempt == MAX_DRAWS {
                        break case;
                    }
                };
                out.push(case);
            }
        }
    }
    Ok(out)
}

/// The full suite: primitives, layers and end-to-end models.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = Rng::new(seed);
    let mut cases = primitive_cases(&mut rng)?;
    cases.extend(layer_cases(&mut rng)?);
    cases.extend(model_cases(&mut rng)?);
    Ok(cases)
}
