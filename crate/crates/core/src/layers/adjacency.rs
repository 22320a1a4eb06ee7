//! Adjacency learning layer.
//!
//! Each instance is concatenated with a permutation-invariant context vector
//! of the whole bag, mapped through a two-layer MLP, and the transformed rows
//! are cross-correlated: `A = sigmoid(X* X*ᵀ / sqrt(d_a))`. The Gram form makes
//! `A` exactly symmetric and the sigmoid keeps every entry in `(0, 1)`, so
//! every node has a positive degree including its self-loop.

use serde::{Deserialize, Serialize};

use crate::diffcore::{ParamStore, Rng, Tensor};
use crate::error::{Error, Result};

use super::{Activation, Dense};

/// Set function used to pool instances into the context vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    #[default]
    Mean,
    Sum,
    Max,
}

/// Column-wise pooling of `n x d` node features into a `1 x d` context.
pub fn context_vector(x: &Tensor, mode: ContextMode) -> Tensor {
    match mode {
        ContextMode::Mean => x.mean_rows(),
        ContextMode::Sum => x.sum_rows(),
        ContextMode::Max => x.max_rows(),
    }
}

/// `sigmoid(X Xᵀ)`, optionally with the Gram matrix divided by `sqrt(cols)`.
pub fn cross_correlation(x_star: &Tensor, scale: bool) -> Tensor {
    let gram = x_star.gram();
    let gram = if scale {
        gram.div_scalar((x_star.cols() as f64).sqrt())
    } else {
        gram
    };
    gram.sigmoid()
}

#[derive(Debug, Clone)]
pub struct AdjacencyLearner {
    pub context: ContextMode,
    pub hidden: Dense,
    pub output: Dense,
    pub scale: bool,
}

impl AdjacencyLearner {
    /// MLP `2d -> hidden -> out_dim`, registered as `{prefix}.mlp1` and
    /// `{prefix}.mlp2`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        context: ContextMode,
        scale: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let hidden = Dense::new(store, &format!("{prefix}.mlp1"), 2 * in_dim, hidden, rng)?;
        let output = Dense::new(store, &format!("{prefix}.mlp2"), hidden.out_dim(), out_dim, rng)?;
        Ok(AdjacencyLearner {
            context,
            hidden,
            output,
            scale,
        })
    }

    /// Transformed features `X*` (one row per instance).
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        if 2 * x.cols() != self.hidden.in_dim() {
            return Err(Error::Shape {
                op: "adjacency_layer",
                lhs: x.shape(),
                rhs: (self.hidden.in_dim(), self.hidden.out_dim()),
            });
        }
        let c = context_vector(x, self.context);
        let with_context = x.concat_cols(&c.repeat_rows(x.rows())?)?;
        let h = self.hidden.forward(&with_context, Activation::Relu)?;
        self.output.forward(&h, Activation::None)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(cross_correlation(&self.embed(x)?, self.scale))
    }
}
