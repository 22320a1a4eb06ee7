use crate::error::{Error, Result};

use super::Parameter;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per trainable parameter, in
/// the order the parameters were passed to [`Adam::new`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Parameter>) -> Self {
        let (m, v) = params
            .into_iter()
            .filter(|p| p.trainable)
            .map(|p| (vec![0.0; p.tensor.len()], vec![0.0; p.tensor.len()]))
            .unzip();
        Adam { config, t: 0, m, v }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Apply one update from the gradients currently accumulated in the
    /// trainable parameters, then zero those gradients.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a Parameter>) -> Result<()> {
        let params: Vec<&Parameter> = params.into_iter().filter(|p| p.trainable).collect();
        if params.len() != self.m.len() {
            return Err(Error::Invalid(format!(
                "adam: optimizer tracks {} parameters, step got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (p, m) in params.iter().zip(&self.m) {
            if !p.tensor.requires_grad() {
                return Err(Error::Invalid(format!("adam: parameter `{}` is not a gradient leaf", p.name)));
            }
            if p.tensor.len() != m.len() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: p.tensor.shape(),
                    rhs: (m.len(), 1),
                });
            }
        }

        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, m), v) in params.iter().zip(&mut self.m).zip(&mut self.v) {
            let mut grad = p.tensor.grad_mut();
            let mut data = p.tensor.data_mut();
            for (((x, g), m), v) in data.iter_mut().zip(grad.iter_mut()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * *g;
                *v = beta2 * *v + (1.0 - beta2) * *g * *g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
                *g = 0.0;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Tensor;

    fn scalar_param(v: f64) -> Parameter {
        Parameter {
            name: "x".into(),
            tensor: Tensor::param(1, 1, vec![v]).unwrap(),
            trainable: true,
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let p = scalar_param(1.0);
        p.tensor.scale(2.0).backward().unwrap();
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() }, [&p]);
        adam.step([&p]).unwrap();
        // m_hat = 2, v_hat = 4 at t = 1.
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert_eq!(p.tensor.item(), expected);
        assert!((p.tensor.item() - 0.9).abs() < 1e-8);
        assert_eq!(p.tensor.grad(), vec![0.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let p = scalar_param(0.123456789);
        let before = p.tensor.item().to_bits();
        let mut adam = Adam::new(AdamConfig::default(), [&p]);
        adam.step([&p]).unwrap();
        adam.step([&p]).unwrap();
        assert_eq!(p.tensor.item().to_bits(), before);
        assert_eq!(adam.steps(), 2);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let p = scalar_param(0.5);
            let mut adam = Adam::new(AdamConfig::default(), [&p]);
            for _ in 0..3 {
                p.tensor.square().backward().unwrap();
                adam.step([&p]).unwrap();
            }
            p.tensor.item().to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mismatched_parameter_list_rejected() {
        let p = scalar_param(1.0);
        let q = Parameter {
            name: "q".into(),
            tensor: Tensor::param(1, 2, vec![0.0, 0.0]).unwrap(),
            trainable: true,
        };
        let mut adam = Adam::new(AdamConfig::default(), [&p]);
        assert!(adam.step([&q]).is_err());
        assert!(adam.step([&p, &q]).is_err());
    }
}
