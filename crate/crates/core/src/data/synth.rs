use serde::{Deserialize, Serialize};

use crate::diffcore::Rng;
use crate::error::{Error, Result};

use super::{Bag, Dataset};

/// Parameters of the synthetic multiple instance task.
///
/// Every instance is standard normal. A positive bag of `n` instances also
/// has `ceil(witness_rate * n)` witnesses, shifted by `separation` along one
/// random unit direction shared by the whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_bags: usize,
    pub dim: usize,
    pub n_range: [usize; 2],
    pub witness_rate: f64,
    pub separation: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_bags: 200,
            dim: 32,
            n_range: [5, 30],
            witness_rate: 0.2,
            separation: 3.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bags < 2 {
            return Err(Error::config("n_bags", "need at least 2 bags"));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "must be positive"));
        }
        if self.n_range[0] == 0 || self.n_range[0] > self.n_range[1] {
            return Err(Error::config("n_range", format!("invalid range {:?}", self.n_range)));
        }
        if !(0.0..=1.0).contains(&self.witness_rate) {
            return Err(Error::config("witness_rate", "must be in [0, 1]"));
        }
        if !(self.separation > 0.0) {
            return Err(Error::config("separation", "must be positive"));
        }
        Ok(())
    }
}

/// Bags alternate positive, negative, ... so the classes differ by at most
/// one bag. Each bag is its own group. Witness flags are recorded.
pub fn synth_mil_dataset(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = Rng::new(seed);
    let d = config.dim;
    let mut direction: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let mut bags = Vec::with_capacity(config.n_bags);
    for b in 0..config.n_bags {
        let label = u8::from(b % 2 == 0);
        let n = rng.range_inclusive(config.n_range[0], config.n_range[1]);
        let mut features: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
        let mut witness = vec![false; n];
        if label == 1 {
            let m = (config.witness_rate * n as f64 - 1e-9).ceil().max(0.0) as usize;
            let mut slots: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut slots);
            for &i in &slots[..m.min(n)] {
                witness[i] = true;
                for (v, u) in features[i * d..(i + 1) * d].iter_mut().zip(&direction) {
                    *v += config.separation * u;
                }
            }
        }
        let id = format!("bag{b:04}");
        bags.push(Bag::from_flat(id.clone(), id, label, n, d, features)?.with_witness(witness)?);
    }
    Dataset::new(bags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_shape_and_balance() {
        let ds = synth_mil_dataset(&SynthConfig::default(), 1).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.dim, 32);
        assert_eq!(ds.num_positive(), 100);
        for bag in &ds.bags {
            let n = bag.num_instances();
            assert!((5..=30).contains(&n));
            let w = bag.witness.as_ref().unwrap().iter().filter(|&&w| w).count();
            let expect = if bag.label == 1 { (0.2 * n as f64 - 1e-9).ceil() as usize } else { 0 };
            assert_eq!(w, expect);
        }
    }

    #[test]
    fn same_seed_same_data() {
        let c = SynthConfig { n_bags: 10, ..Default::default() };
        assert_eq!(synth_mil_dataset(&c, 5).unwrap(), synth_mil_dataset(&c, 5).unwrap());
        assert_ne!(synth_mil_dataset(&c, 5).unwrap(), synth_mil_dataset(&c, 6).unwrap());
    }

    #[test]
    fn zero_rate_has_no_witnesses() {
        let c = SynthConfig { witness_rate: 0.0, n_bags: 20, ..Default::default() };
        let ds = synth_mil_dataset(&c, 0).unwrap();
        assert!(ds.bags.iter().all(|b| b.witness.as_ref().unwrap().iter().all(|w| !w)));
    }

    #[test]
    fn witnesses_shifted_along_direction() {
        let c = SynthConfig { separation: 10.0, n_bags: 40, ..Default::default() };
        let ds = synth_mil_dataset(&c, 2).unwrap();
        let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut wit = Vec::new();
        let mut rest = Vec::new();
        for bag in &ds.bags {
            for (x, &w) in bag.instances().zip(bag.witness.as_ref().unwrap()) {
                if w { wit.push(norm(x)) } else { rest.push(norm(x)) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&wit) > mean(&rest) + 3.0);
    }

    #[test]
    fn rejects_non_positive_separation() {
        let c = SynthConfig { separation: 0.0, ..Default::default() };
        assert!(synth_mil_dataset(&c, 0).is_err());
    }
}
