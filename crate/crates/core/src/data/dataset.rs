use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::serialize_f17_vec;

use super::Bag;

/// Per-feature affine standardization fitted on training bags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    #[serde(serialize_with = "serialize_f17_vec")]
    pub mean: Vec<f64>,
    #[serde(serialize_with = "serialize_f17_vec")]
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl Standardization {
    /// Population mean and standard deviation over every instance of `bags`.
    pub fn fit<'a>(bags: impl IntoIterator<Item = &'a Bag>, dim: usize) -> Result<Self> {
        let mut count = 0usize;
        let mut sum = vec![0.0; dim];
        let mut rows: Vec<&[f64]> = Vec::new();
        for bag in bags {
            for x in bag.instances() {
                for (s, v) in sum.iter_mut().zip(x) {
                    *s += v;
                }
                rows.push(x);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Data("cannot fit standardization on zero instances".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; dim];
        for x in rows {
            for ((v, m), xi) in var.iter_mut().zip(&mean).zip(x) {
                *v += (xi - m) * (xi - m);
            }
        }
        let std = var.iter().map(|v| (v / count as f64).sqrt()).collect();
        Ok(Standardization { mean, std })
    }

    pub fn apply(&self, bag: &Bag) -> Bag {
        let mut out = bag.clone();
        let d = self.mean.len();
        for (i, v) in out.features_mut().iter_mut().enumerate() {
            let j = i % d;
            *v = (*v - self.mean[j]) / self.std[j].max(STD_FLOOR);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub bags: Vec<Bag>,
    pub dim: usize,
    pub stats: Option<Standardization>,
}

impl Dataset {
    pub fn new(bags: Vec<Bag>) -> Result<Self> {
        let dim = bags
            .first()
            .map(Bag::dim)
            .ok_or_else(|| Error::Data("dataset has no bags".into()))?;
        let mut ids = HashSet::new();
        for bag in &bags {
            if bag.dim() != dim {
                return Err(Error::Data(format!(
                    "bag `{}` has feature width {}, expected {dim}",
                    bag.bag_id,
                    bag.dim()
                )));
            }
            if !ids.insert(bag.bag_id.as_str()) {
                return Err(Error::Data(format!("duplicate bag id `{}`", bag.bag_id)));
            }
        }
        Ok(Dataset { bags, dim, stats: None })
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.bags.iter().map(|b| b.label).collect()
    }

    pub fn num_instances(&self) -> usize {
        self.bags.iter().map(Bag::num_instances).sum()
    }

    pub fn num_positive(&self) -> usize {
        self.bags.iter().filter(|b| b.label == 1).count()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&Bag> {
        indices.iter().map(|&i| &self.bags[i]).collect()
    }
}

/// Standardize every bag with statistics fitted only on the bags at
/// `fit_indices` (the training split).
pub fn standardize(dataset: &Dataset, fit_indices: &[usize]) -> Result<Dataset> {
    let stats = Standardization::fit(dataset.subset(fit_indices), dataset.dim)?;
    Ok(Dataset {
        bags: dataset.bags.iter().map(|b| stats.apply(b)).collect(),
        dim: dataset.dim,
        stats: Some(stats),
    })
}
