use serde::{Deserialize, Serialize};

use crate::diffcore::AdamConfig;
use crate::error::{Error, Result};
use crate::graphcore::LambdaMaxMode;
use crate::layers::{ContextMode, PoolMode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvKind {
    #[default]
    Cheb,
    Sage,
}

/// Full hyperparameter record of a model and its training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub conv: ConvKind,
    pub cheb_k: usize,
    pub conv_layers: usize,
    /// Widths of the instance encoder's dense layers.
    pub encoder_dims: Vec<usize>,
    pub conv_hidden: usize,
    pub adjacency_hidden: usize,
    pub adjacency_dim: usize,
    pub context: ContextMode,
    pub adjacency_scale: bool,
    pub pooling: PoolMode,
    pub batchnorm: bool,
    pub dropout_p: f64,
    /// Hidden widths of the classification head; a final width-1 logit layer
    /// is always appended.
    pub head_dims: Vec<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub seed: u64,
    pub lambda_max_mode: LambdaMaxMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        ModelConfig {
            conv: ConvKind::Cheb,
            cheb_k: 7,
            conv_layers: 2,
            encoder_dims: vec![256, 128],
            conv_hidden: 128,
            adjacency_hidden: 128,
            adjacency_dim: 64,
            context: ContextMode::Mean,
            adjacency_scale: true,
            pooling: PoolMode::Mean,
            batchnorm: false,
            dropout_p: 0.5,
            head_dims: vec![64],
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            epochs: 100,
            seed: 0,
            lambda_max_mode: LambdaMaxMode::Fixed2,
        }
    }
}

pub const CHEB_ORDERS: [usize; 3] = [3, 5, 7];

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::config(field, "must be positive"))
            } else {
                Ok(())
            }
        };
        if self.conv == ConvKind::Cheb && !CHEB_ORDERS.contains(&self.cheb_k) {
            return Err(Error::config("cheb_k", format!("must be one of {CHEB_ORDERS:?}, got {}", self.cheb_k)));
        }
        positive("conv_layers", self.conv_layers)?;
        positive("conv_hidden", self.conv_hidden)?;
        positive("adjacency_hidden", self.adjacency_hidden)?;
        positive("adjacency_dim", self.adjacency_dim)?;
        positive("epochs", self.epochs)?;
        if self.encoder_dims.contains(&0) {
            return Err(Error::config("encoder_dims", "all widths must be positive"));
        }
        if self.head_dims.contains(&0) {
            return Err(Error::config("head_dims", "all widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::config("dropout_p", format!("must be in [0, 1), got {}", self.dropout_p)));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::config("lr", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("beta1", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta2", "must be in [0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::config("adam_eps", "must be positive"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    /// Width of the pooled bag embedding.
    pub fn pooled_dim(&self) -> usize {
        self.conv_hidden
    }

    /// Architecture label in the ablation table's naming, e.g. `Cheb-7`,
    /// `Cheb 3_BN`, `SAGE CONV`.
    pub fn architecture_name(&self) -> String {
        let base = match self.conv {
            ConvKind::Cheb => format!("Cheb-{}", self.cheb_k),
            ConvKind::Sage => "SAGE CONV".to_string(),
        };
        if self.batchnorm {
            format!("{}_BN", base.replace('-', " "))
        } else {
            base
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_fields_are_named() {
        let cases: Vec<(ModelConfig, &str)> = vec![
            (ModelConfig { cheb_k: 4, ..Default::default() }, "cheb_k"),
            (ModelConfig { dropout_p: 1.0, ..Default::default() }, "dropout_p"),
            (ModelConfig { conv_hidden: 0, ..Default::default() }, "conv_hidden"),
            (ModelConfig { encoder_dims: vec![4, 0], ..Default::default() }, "encoder_dims"),
            (ModelConfig { lr: f64::NAN, ..Default::default() }, "lr"),
        ];
        for (cfg, field) in cases {
            match cfg.validate() {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected config error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn sage_ignores_cheb_order() {
        ModelConfig { conv: ConvKind::Sage, cheb_k: 0, ..Default::default() }.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ModelConfig>(r#"{"cheb_kk": 3}"#).unwrap_err();
        assert!(err.to_string().contains("cheb_kk"));
        let cfg: ModelConfig = serde_json::from_str(r#"{"cheb_k": 3, "pooling": "attention"}"#).unwrap();
        assert_eq!(cfg.cheb_k, 3);
        assert_eq!(cfg.pooling, PoolMode::Attention);
    }

    #[test]
    fn architecture_names() {
        let mut c = ModelConfig::default();
        assert_eq!(c.architecture_name(), "Cheb-7");
        c.cheb_k = 3;
        c.batchnorm = true;
        assert_eq!(c.architecture_name(), "Cheb 3_BN");
        c.conv = ConvKind::Sage;
        assert_eq!(c.architecture_name(), "SAGE CONV_BN");
    }
}
