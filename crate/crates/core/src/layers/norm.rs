use crate::diffcore::{ParamStore, Rng, Tensor};
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Batch normalization over the nodes of one bag.
///
/// In training mode each feature is normalized with the bag's own mean and
/// (biased) variance, and the running statistics move towards the batch
/// statistics with momentum 0.1 (the running variance uses the unbiased
/// estimate). Evaluation mode uses the running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    /// Registers `{prefix}.gamma`, `{prefix}.beta` (trainable) and
    /// `{prefix}.running_mean`, `{prefix}.running_var` (not trainable).
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize) -> Result<Self> {
        Ok(BatchNorm {
            gamma: store.filled(format!("{prefix}.gamma"), 1, dim, 1.0, true)?,
            beta: store.filled(format!("{prefix}.beta"), 1, dim, 0.0, true)?,
            running_mean: store.filled(format!("{prefix}.running_mean"), 1, dim, 0.0, false)?,
            running_var: store.filled(format!("{prefix}.running_var"), 1, dim, 1.0, false)?,
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        })
    }

    pub fn forward(&self, x: &Tensor, training: bool) -> Result<Tensor> {
        if x.cols() != self.gamma.cols() {
            return Err(Error::Shape {
                op: "batchnorm",
                lhs: x.shape(),
                rhs: self.gamma.shape(),
            });
        }
        let normalized = if training {
            let n = x.rows();
            if n < 2 {
                return Err(Error::Invalid(
                    "batchnorm in training mode needs at least 2 nodes per bag, got 1".into(),
                ));
            }
            let mean = x.mean_rows();
            let centered = x.sub(&mean)?;
            let var = centered.square().mean_rows();
            self.update_running(&mean.data(), &var.data(), n);
            centered.mul(&var.add_scalar(self.eps).powf(-0.5))?
        } else {
            let inv_std: Vec<f64> = self.running_var.data().iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
            x.sub(&self.running_mean.detach())?.mul(&Tensor::row_vector(&inv_std)?)?
        };
        normalized.mul(&self.gamma)?.add(&self.beta)
    }

    fn update_running(&self, mean: &[f64], var: &[f64], n: usize) {
        let unbias = n as f64 / (n as f64 - 1.0);
        let m = self.momentum;
        for (r, b) in self.running_mean.data_mut().iter_mut().zip(mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.data_mut().iter_mut().zip(var) {
            *r = (1.0 - m) * *r + m * b * unbias;
        }
    }
}

/// Inverted dropout: in training mode each entry is zeroed with probability
/// `p` and survivors are scaled by `1 / (1 - p)`. Identity otherwise.
pub fn dropout(x: &Tensor, p: f64, rng: &mut Rng, training: bool) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Invalid(format!("dropout probability must be in [0, 1), got {p}")));
    }
    if !training || p == 0.0 {
        return Ok(x.clone());
    }
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..x.len()).map(|_| if rng.next_f64() < p { 0.0 } else { keep }).collect();
    x.mul(&Tensor::constant(x.rows(), x.cols(), mask)?)
}
