//! The 32-cell ablation grid (Chebyshev 3/5/7 and SAGE, with and without
//! batch norm, four pooling modes) on a small synthetic dataset, printed as
//! the wide CSV table.
//!
//! ```text
//! cargo run --release --example ablation_grid -- [jobs]
//! ```

use graphmil::data::{synth_mil_dataset, SynthConfig};
use graphmil::harness::{run_ablation, write_ablation_csv};
use graphmil::model::ModelConfig;

fn main() -> graphmil::Result<()> {
    let jobs: usize = std::env::args().nth(1).map_or(1, |s| s.parse().expect("jobs"));
    let data = synth_mil_dataset(&SynthConfig { n_bags: 40, dim: 16, n_range: [4, 12], ..SynthConfig::default() }, 11)?;
    let base = ModelConfig {
        encoder_dims: vec![32],
        conv_hidden: 16,
        adjacency_hidden: 16,
        adjacency_dim: 8,
        head_dims: vec![16],
        epochs: 10,
        ..ModelConfig::default()
    };
    let rows = run_ablation(&data, &base, 4, 0, jobs)?;
    let failed = rows.iter().filter(|r| r.accuracy.is_err()).count();
    eprintln!("{} cells, {failed} failed", rows.len());
    write_ablation_csv(&rows, std::io::stdout().lock())
}
