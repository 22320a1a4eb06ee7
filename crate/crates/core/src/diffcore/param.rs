use std::collections::HashSet;

use crate::error::{Error, Result};

use super::{Rng, Tensor};

/// A named tensor owned by a model.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Ordered registry of a model's parameters. Registration order is the
/// initialization order, so it is also the order in which weights consume the
/// random stream.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    names: HashSet<String>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> Result<Tensor> {
        let name = name.into();
        if !self.names.insert(name.clone()) {
            return Err(Error::Invalid(format!("duplicate parameter name `{name}`")));
        }
        self.params.push(Parameter {
            name,
            tensor: tensor.clone(),
            trainable,
        });
        Ok(tensor)
    }

    /// Glorot-uniform `fan_in x fan_out` weight, limit `sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Tensor> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.uniform(-limit, limit)).collect();
        self.register(name, Tensor::param(fan_in, fan_out, data)?, true)
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<Tensor> {
        self.register(name, Tensor::param(rows, cols, vec![0.0; rows * cols])?, true)
    }

    pub fn filled(&mut self, name: impl Into<String>, rows: usize, cols: usize, value: f64, trainable: bool) -> Result<Tensor> {
        let t = if trainable {
            Tensor::param(rows, cols, vec![value; rows * cols])?
        } else {
            Tensor::constant(rows, cols, vec![value; rows * cols])?
        };
        self.register(name, t, trainable)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn trainable(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter().filter(|p| p.trainable)
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn as_slice(&self) -> &[Parameter] {
        &self.params
    }

    pub fn zero_grads(&self) {
        self.params.iter().for_each(|p| p.tensor.zero_grad());
    }
}
