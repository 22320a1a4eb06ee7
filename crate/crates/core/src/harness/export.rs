use std::io::Write;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fmt::f17;
use crate::layers::PoolMode;
use crate::model::MilModel;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRow {
    pub bag_id: String,
    pub instance_index: usize,
    pub attention: f64,
}

/// Per-instance attention weights in evaluation mode, most attended first
/// within each bag (ties keep instance order).
pub fn export_attention(model: &MilModel, dataset: &Dataset) -> Result<Vec<AttentionRow>> {
    if model.config.pooling != PoolMode::Attention {
        return Err(Error::Invalid(format!(
            "attention export needs a model trained with \"pooling\": \"attention\" (this one uses \"{}\")",
            model.config.pooling.as_str()
        )));
    }
    let mut rows = Vec::new();
    for bag in &dataset.bags {
        let weights = model
            .predict(bag)?
            .attention
            .expect("attention pooling always reports weights");
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
        rows.extend(order.into_iter().map(|i| AttentionRow {
            bag_id: bag.bag_id.clone(),
            instance_index: i,
            attention: weights[i],
        }));
    }
    Ok(rows)
}

pub fn write_attention_csv(rows: &[AttentionRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bag_id", "instance_index", "attention"])?;
    for r in rows {
        w.write_record([r.bag_id.clone(), r.instance_index.to_string(), f17(r.attention)])?;
    }
    w.flush().map_err(|e| Error::io("<attention csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub bag_id: String,
    pub label: u8,
    pub vector: Vec<f64>,
}

/// The pooled bag representation (input of the classifier head), one row per
/// bag, in evaluation mode.
pub fn export_embeddings(model: &MilModel, dataset: &Dataset) -> Result<Vec<EmbeddingRow>> {
    dataset
        .bags
        .iter()
        .map(|bag| {
            Ok(EmbeddingRow {
                bag_id: bag.bag_id.clone(),
                label: bag.label,
                vector: model.predict(bag)?.embedding,
            })
        })
        .collect()
}

/// Header `bag_id,label,e0,...`.
pub fn write_embeddings_csv(rows: &[EmbeddingRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let width = rows.first().map_or(0, |r| r.vector.len());
    let mut header = vec!["bag_id".to_string(), "label".to_string()];
    header.extend((0..width).map(|j| format!("e{j}")));
    w.write_record(&header)?;
    for r in rows {
        let mut record = vec![r.bag_id.clone(), r.label.to_string()];
        record.extend(r.vector.iter().map(|&v| f17(v)));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<embedding csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_mil_dataset, SynthConfig};
    use crate::diffcore::Rng;
    use crate::model::{build_model, ModelConfig};

    fn config(pooling: PoolMode) -> ModelConfig {
        ModelConfig {
            cheb_k: 3,
            encoder_dims: vec![8],
            conv_hidden: 5,
            adjacency_hidden: 4,
            adjacency_dim: 3,
            head_dims: vec![4],
            pooling,
            ..Default::default()
        }
    }

    fn data() -> Dataset {
        synth_mil_dataset(&SynthConfig { n_bags: 6, dim: 4, ..Default::default() }, 3).unwrap()
    }

    #[test]
    fn zero_gate_gives_uniform_weights() {
        let model = build_model(&config(PoolMode::Attention), 4, &mut Rng::new(0)).unwrap();
        let gate = model.param("pool.gate.weight").unwrap();
        gate.tensor.set_data(&vec![0.0; gate.tensor.len()]).unwrap();
        let ds = data();
        let rows = export_attention(&model, &ds).unwrap();
        assert_eq!(rows.len(), ds.num_instances());
        for bag in &ds.bags {
            let n = bag.num_instances() as f64;
            for r in rows.iter().filter(|r| r.bag_id == bag.bag_id) {
                assert!((r.attention - 1.0 / n).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sorted_and_normalized() {
        let model = build_model(&config(PoolMode::Attention), 4, &mut Rng::new(1)).unwrap();
        let ds = data();
        let rows = export_attention(&model, &ds).unwrap();
        for bag in &ds.bags {
            let w: Vec<f64> = rows.iter().filter(|r| r.bag_id == bag.bag_id).map(|r| r.attention).collect();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(w.windows(2).all(|p| p[0] >= p[1]));
        }
    }

    #[test]
    fn non_attention_model_rejected() {
        let model = build_model(&config(PoolMode::Mean), 4, &mut Rng::new(0)).unwrap();
        let msg = export_attention(&model, &data()).unwrap_err().to_string();
        assert!(msg.contains("attention"), "{msg}");
    }

    #[test]
    fn embeddings_one_row_per_bag() {
        let cfg = config(PoolMode::Max);
        let model = build_model(&cfg, 4, &mut Rng::new(0)).unwrap();
        let ds = data();
        let a = export_embeddings(&model, &ds).unwrap();
        assert_eq!(a.len(), ds.len());
        assert!(a.iter().all(|r| r.vector.len() == cfg.pooled_dim()));
        assert_eq!(a, export_embeddings(&model, &ds).unwrap());
        let mut buf = Vec::new();
        write_embeddings_csv(&a, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("bag_id,label,e0,e1,e2,e3,e4\n"));
    }
}
