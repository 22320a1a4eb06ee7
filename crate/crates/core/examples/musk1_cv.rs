//! Repeated 10-fold cross-validation on the UCI MUSK1 molecules with the
//! Chebyshev-7 / mean-pooling model from `configs/musk1.json`.
//!
//! ```text
//! cargo run --release --example musk1_cv -- path/to/clean1.data [repeats]
//! ```

use std::time::Instant;

use graphmil::cli::parse_config;
use graphmil::data::load_musk1;
use graphmil::harness::{run_cv, CvOptions};

fn main() -> graphmil::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: musk1_cv <clean1.data> [repeats]");
        std::process::exit(1);
    };
    let doc = serde_json::from_str(include_str!("../configs/musk1.json")).expect("bundled config is valid JSON");
    let config = parse_config(doc)?;
    let repeats = args.next().map_or(config.repeats, |s| s.parse().expect("repeats"));

    let data = load_musk1(std::path::Path::new(&path))?;
    println!(
        "{} molecules ({} musk), {} conformations",
        data.len(),
        data.num_positive(),
        data.num_instances()
    );
    let options = CvOptions { k: config.k, repeats, base_seed: config.base_seed, standardize: config.standardize, ..CvOptions::default() };

    let start = Instant::now();
    let report = run_cv(&data, &config.model, &options)?;
    println!(
        "{}: accuracy {:.4} +/- {:.4} over {} folds ({:.1?})",
        report.architecture,
        report.summary.mean_accuracy,
        report.summary.std_accuracy,
        report.folds.len(),
        start.elapsed()
    );
    Ok(())
}
