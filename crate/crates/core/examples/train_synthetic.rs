//! Cross-validate the default model on the synthetic multiple instance task.
//!
//! ```text
//! cargo run --release --example train_synthetic -- [seed] [epochs]
//! ```

use std::time::Instant;

use graphmil::data::{synth_mil_dataset, SynthConfig};
use graphmil::harness::{run_cv, CvOptions};
use graphmil::model::ModelConfig;

fn main() -> graphmil::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));

    let data = synth_mil_dataset(&SynthConfig::default(), seed)?;
    println!(
        "{} bags ({} positive), {} instances, d = {}",
        data.len(),
        data.num_positive(),
        data.num_instances(),
        data.dim
    );
    let config = ModelConfig { epochs, seed, ..ModelConfig::default() };
    let options = CvOptions { k: 5, repeats: 1, base_seed: seed, ..CvOptions::default() };

    let start = Instant::now();
    let report = run_cv(&data, &config, &options)?;
    for fold in &report.folds {
        println!(
            "fold {}: accuracy {:.3}  auc {:.3}",
            fold.fold,
            fold.accuracy,
            fold.auc.map_or(f64::NAN, |a| a.0)
        );
    }
    println!(
        "{}: mean accuracy {:.3} +/- {:.3}, mean auc {:.3}  ({:.1?})",
        report.architecture,
        report.summary.mean_accuracy,
        report.summary.std_accuracy,
        report.summary.mean_auc.map_or(f64::NAN, |a| a.0),
        start.elapsed()
    );
    Ok(())
}
