use serde::{Deserialize, Serialize};

use crate::diffcore::{ParamStore, Rng, Tensor};
use crate::error::{Error, Result};

use super::{Activation, Dense};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    Mean,
    Attention,
    Max,
    Add,
}

impl PoolMode {
    pub const ALL: [PoolMode; 4] = [PoolMode::Mean, PoolMode::Attention, PoolMode::Max, PoolMode::Add];

    pub fn as_str(self) -> &'static str {
        match self {
            PoolMode::Mean => "mean",
            PoolMode::Attention => "attention",
            PoolMode::Max => "max",
            PoolMode::Add => "add",
        }
    }
}

/// Column-wise reduction over nodes for the parameter-free poolings.
pub fn simple_pool(x: &Tensor, mode: PoolMode) -> Result<Tensor> {
    match mode {
        PoolMode::Mean => Ok(x.mean_rows()),
        PoolMode::Max => Ok(x.max_rows()),
        PoolMode::Add => Ok(x.sum_rows()),
        PoolMode::Attention => Err(Error::Invalid(
            "attention pooling has parameters; use AttentionPool".into(),
        )),
    }
}

/// Global attention pooling: a dense gate scores each node, the scores are
/// softmax-normalized over the bag and the nodes are averaged with those
/// weights.
#[derive(Debug, Clone)]
pub struct AttentionPool {
    pub gate: Dense,
}

impl AttentionPool {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(AttentionPool {
            gate: Dense::new(store, &format!("{prefix}.gate"), dim, 1, rng)?,
        })
    }

    /// Returns the pooled `1 x d` vector and the `n x 1` attention weights.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let logits = self.gate.forward(x, Activation::None)?;
        let alpha = logits.softmax()?;
        let pooled = alpha.transpose().matmul(x)?;
        Ok((pooled, alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x22() -> Tensor {
        Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap()
    }

    #[test]
    fn simple_modes() {
        assert_eq!(simple_pool(&x22(), PoolMode::Add).unwrap().to_vec(), vec![4.0, 6.0]);
        assert_eq!(simple_pool(&x22(), PoolMode::Max).unwrap().to_vec(), vec![3.0, 4.0]);
        assert_eq!(simple_pool(&x22(), PoolMode::Mean).unwrap().to_vec(), vec![2.0, 3.0]);
    }

    #[test]
    fn single_node_pools_to_itself() {
        let x = Tensor::row_vector(&[0.7, -0.1]).unwrap();
        for mode in [PoolMode::Mean, PoolMode::Max, PoolMode::Add] {
            assert_eq!(simple_pool(&x, mode).unwrap().to_vec(), x.to_vec());
        }
    }

    fn pool_with_gate(w: &[f64], b: f64) -> AttentionPool {
        AttentionPool {
            gate: Dense {
                weight: Tensor::col_vector(w).unwrap(),
                bias: Tensor::scalar(b),
            },
        }
    }

    #[test]
    fn zero_gate_is_mean() {
        let pool = pool_with_gate(&[0.0, 0.0], 0.0);
        let x = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[-1.0, 0.0]]).unwrap();
        let (r, alpha) = pool.forward(&x).unwrap();
        for a in alpha.to_vec() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        for (v, e) in r.to_vec().iter().zip([1.0, 2.0]) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn sharp_gate_selects_one_node() {
        // Logits are (0, 20): the gate reads the first feature.
        let pool = pool_with_gate(&[1.0, 0.0], 0.0);
        let x = Tensor::from_rows(&[&[0.0, 5.0], &[20.0, -3.0]]).unwrap();
        let (r, alpha) = pool.forward(&x).unwrap();
        let a = alpha.to_vec();
        let small = 1.0 / (1.0 + 20f64.exp());
        assert!((a[0] - small).abs() < 1e-18 && a[0] < 2.1e-9);
        assert!((a[1] - 1.0).abs() < 1e-8);
        let r = r.to_vec();
        assert!((r[0] - 20.0).abs() < 1e-6 && (r[1] + 3.0).abs() < 1e-6);
    }

    #[test]
    fn attention_rejected_by_simple_pool() {
        assert!(simple_pool(&x22(), PoolMode::Attention).is_err());
    }
}
