use graphmil::data::{synth_mil_dataset, SynthConfig};
use graphmil::harness::{accuracy, fit_model, run_cv, score_bags, CvOptions};
use graphmil::model::{checkpoint, ModelConfig};

fn small_config() -> ModelConfig {
    ModelConfig {
        encoder_dims: vec![32, 16],
        conv_hidden: 16,
        adjacency_hidden: 16,
        adjacency_dim: 8,
        epochs: 15,
        ..ModelConfig::default()
    }
}

#[test]
fn well_separated_witnesses_are_learned() {
    // One draw of the generator, split in half: the witness pattern is
    // shared between the halves.
    let synth = SynthConfig { n_bags: 120, dim: 16, separation: 10.0, ..SynthConfig::default() };
    let data = synth_mil_dataset(&synth, 1).unwrap();
    let (train, test) = data.bags.split_at(60);
    let (model, history) = fit_model(&small_config(), &train.iter().collect::<Vec<_>>(), 0, true).unwrap();
    assert!(history.loss.last().unwrap() < history.loss.first().unwrap());

    let test_bags: Vec<_> = test.iter().collect();
    let scores: Vec<f64> = score_bags(&model, &test_bags).unwrap().iter().map(|s| s.score).collect();
    let labels: Vec<u8> = test.iter().map(|b| b.label).collect();
    let acc = accuracy(&scores, &labels, 0.5).unwrap();
    assert!(acc >= 0.95, "held-out accuracy {acc}");
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let data = synth_mil_dataset(&SynthConfig { n_bags: 12, dim: 6, ..SynthConfig::default() }, 3).unwrap();
    let bags: Vec<_> = data.bags.iter().collect();
    let config = ModelConfig { epochs: 2, ..small_config() };
    let (model, _) = fit_model(&config, &bags, 4, true).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.gmil");
    checkpoint::save(&model, &path).unwrap();
    let restored = checkpoint::load(&path).unwrap();
    for bag in &data.bags {
        assert_eq!(model.predict(bag).unwrap(), restored.predict(bag).unwrap());
    }
}

#[test]
fn cv_report_shape_and_parallel_determinism() {
    let data = synth_mil_dataset(&SynthConfig { n_bags: 16, dim: 6, n_range: [3, 6], ..SynthConfig::default() }, 9).unwrap();
    let config = ModelConfig { epochs: 2, ..small_config() };
    let options = CvOptions { k: 4, repeats: 2, base_seed: 5, ..CvOptions::default() };
    let serial = run_cv(&data, &config, &options).unwrap();
    assert_eq!(serial.folds.len(), 8);
    assert_eq!(serial.folds.iter().map(|f| f.seed).collect::<Vec<_>>(), vec![5, 5, 5, 5, 6, 6, 6, 6]);
    let parallel = run_cv(&data, &config, &CvOptions { jobs: 3, ..options }).unwrap();
    assert_eq!(serial.to_json().unwrap(), parallel.to_json().unwrap());
}
