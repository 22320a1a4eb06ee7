use serde::{Deserialize, Serialize};

use crate::diffcore::{ParamStore, Rng, Tensor};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

/// `activation(x W + b)` with `b` broadcast over rows.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor, activation: Activation) -> Result<Tensor> {
    let y = x.matmul(w)?.add(b)?;
    Ok(match activation {
        Activation::Relu => y.relu(),
        Activation::None => y,
    })
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    /// Registers `{prefix}.weight` (Glorot-uniform) then `{prefix}.bias` (zeros).
    pub fn new(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Self> {
        let weight = store.glorot(format!("{prefix}.weight"), fan_in, fan_out, rng)?;
        let bias = store.zeros(format!("{prefix}.bias"), 1, fan_out)?;
        Ok(Dense { weight, bias })
    }

    pub fn forward(&self, x: &Tensor, activation: Activation) -> Result<Tensor> {
        dense(x, &self.weight, &self.bias, activation)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}
