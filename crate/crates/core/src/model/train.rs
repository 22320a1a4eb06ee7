use serde::Serialize;

use crate::data::Bag;
use crate::diffcore::{Adam, Rng};
use crate::error::{Error, Result};

use super::{bce_loss, MilModel, Mode};

/// Per-epoch mean training loss and training accuracy (predictions taken
/// from the training-mode forward pass that produced each update).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Train for `model.config.epochs` epochs with one Adam step per bag. Bag
/// order is reshuffled from `rng` every epoch; dropout masks come from the
/// same stream.
pub fn train(model: &mut MilModel, bags: &[&Bag], rng: &mut Rng) -> Result<TrainHistory> {
    let positives = bags.iter().filter(|b| b.label == 1).count();
    if positives == 0 || positives == bags.len() {
        return Err(Error::Data(format!(
            "training needs at least one bag of each class (got {positives} positive of {})",
            bags.len()
        )));
    }
    let mut adam = Adam::new(model.config.adam(), model.params());
    let mut order: Vec<usize> = (0..bags.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..model.config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut correct = 0usize;
        for &i in &order {
            let bag = bags[i];
            let out = model.forward(&bag.to_tensor(), &mut Mode::Train(rng))?;
            let loss = bce_loss(&out.logit, bag.label)?;
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    bag: i,
                    bag_id: bag.bag_id.clone(),
                });
            }
            total += value;
            if (out.logit.item() >= 0.0) == (bag.label == 1) {
                correct += 1;
            }
            loss.backward()?;
            adam.step(model.params())?;
        }
        let n = bags.len() as f64;
        history.loss.push(total / n);
        history.accuracy.push(correct as f64 / n);
        log::debug!("epoch {epoch}: loss {:.5} acc {:.3}", total / n, correct as f64 / n);
    }
    Ok(history)
}
