use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// One labeled set of instance feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub bag_id: String,
    /// Patient or molecule id; folds never split a group.
    pub group_id: String,
    pub label: u8,
    n: usize,
    d: usize,
    features: Vec<f64>,
    /// Per-instance witness flags, known only for synthetic data.
    pub witness: Option<Vec<bool>>,
}

impl Bag {
    pub fn new(bag_id: impl Into<String>, group_id: impl Into<String>, label: u8, rows: Vec<Vec<f64>>) -> Result<Self> {
        let bag_id = bag_id.into();
        let d = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || d == 0 {
            return Err(Error::Data(format!("bag `{bag_id}` has no instances")));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Data(format!("bag `{bag_id}` has instances of different widths")));
        }
        Self::from_flat(bag_id, group_id, label, rows.len(), d, rows.concat())
    }

    pub fn from_flat(
        bag_id: impl Into<String>,
        group_id: impl Into<String>,
        label: u8,
        n: usize,
        d: usize,
        features: Vec<f64>,
    ) -> Result<Self> {
        let bag_id = bag_id.into();
        if label > 1 {
            return Err(Error::Data(format!("bag `{bag_id}`: label must be 0 or 1, got {label}")));
        }
        if n == 0 || d == 0 || features.len() != n * d {
            return Err(Error::Data(format!(
                "bag `{bag_id}`: expected {n}x{d} features, got {}",
                features.len()
            )));
        }
        Ok(Bag {
            bag_id,
            group_id: group_id.into(),
            label,
            n,
            d,
            features,
            witness: None,
        })
    }

    pub fn with_witness(mut self, witness: Vec<bool>) -> Result<Self> {
        if witness.len() != self.n {
            return Err(Error::Data(format!("bag `{}`: witness flags length mismatch", self.bag_id)));
        }
        self.witness = Some(witness);
        Ok(self)
    }

    pub fn num_instances(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }

    pub fn instance(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn instances(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks(self.d)
    }

    /// Features as a constant `n x d` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::constant(self.n, self.d, self.features.clone()).expect("validated shape")
    }

    /// Copy with instances reordered so row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Bag {
        assert_eq!(order.len(), self.n);
        let features = order.iter().flat_map(|&i| self.instance(i).to_vec()).collect();
        Bag {
            features,
            witness: self.witness.as_ref().map(|w| order.iter().map(|&i| w[i]).collect()),
            ..self.clone()
        }
    }
}
