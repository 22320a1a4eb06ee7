use std::io::Write;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fmt::f17;
use crate::layers::PoolMode;
use crate::model::{ConvKind, ModelConfig, CHEB_ORDERS};

use super::cv::{run_cv, run_parallel, CvOptions};

/// One architecture/pooling cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub architecture: String,
    pub pooling: PoolMode,
    /// Mean k-fold test accuracy, or the error that stopped this cell.
    pub accuracy: std::result::Result<f64, String>,
}

/// The eight architectures: Chebyshev orders 3, 5, 7 and SAGE, each with and
/// without batch normalization. Other settings come from `base`.
pub fn architectures(base: &ModelConfig) -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for &k in CHEB_ORDERS.iter() {
        for bn in [false, true] {
            out.push(ModelConfig { conv: ConvKind::Cheb, cheb_k: k, batchnorm: bn, ..base.clone() });
        }
    }
    for bn in [false, true] {
        out.push(ModelConfig { conv: ConvKind::Sage, batchnorm: bn, ..base.clone() });
    }
    out
}

/// Every architecture crossed with every pooling mode (32 configurations).
pub fn ablation_grid(base: &ModelConfig) -> Vec<ModelConfig> {
    architectures(base)
        .into_iter()
        .flat_map(|arch| PoolMode::ALL.into_iter().map(move |pooling| ModelConfig { pooling, ..arch.clone() }))
        .collect()
}

/// Single-repeat k-fold CV for each grid cell. A failing cell is recorded
/// and the rest of the grid still runs.
pub fn run_ablation(dataset: &Dataset, base: &ModelConfig, k: usize, seed: u64, jobs: usize) -> Result<Vec<AblationRow>> {
    let options = CvOptions { k, repeats: 1, base_seed: seed, standardize: true, jobs: 1 };
    run_parallel(jobs, ablation_grid(base), |config| {
        let accuracy = run_cv(dataset, &config, &options)
            .map(|r| r.summary.mean_accuracy)
            .map_err(|e| e.to_string());
        match &accuracy {
            Ok(a) => log::info!("{} / {}: {a:.4}", config.architecture_name(), config.pooling.as_str()),
            Err(e) => log::warn!("{} / {} failed: {e}", config.architecture_name(), config.pooling.as_str()),
        }
        AblationRow { architecture: config.architecture_name(), pooling: config.pooling, accuracy }
    })
}

/// Wide table with one line per architecture and one accuracy column per
/// pooling mode (`configuration,mean,attention,max,add`), sorted by the
/// mean-pooling column, best first. Failed cells read `ERR`.
pub fn write_ablation_csv(rows: &[AblationRow], writer: impl Write) -> Result<()> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.architecture.as_str()) {
            names.push(&r.architecture);
        }
    }
    let cell = |name: &str, pooling: PoolMode| rows.iter().find(|r| r.architecture == name && r.pooling == pooling);
    let key = |name: &str| cell(name, PoolMode::Mean).and_then(|r| r.accuracy.clone().ok()).unwrap_or(f64::NEG_INFINITY);
    names.sort_by(|a, b| key(b).total_cmp(&key(a)));

    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["configuration".to_string()];
    header.extend(PoolMode::ALL.iter().map(|p| p.as_str().to_string()));
    w.write_record(&header)?;
    for name in names {
        let mut record = vec![name.to_string()];
        for p in PoolMode::ALL {
            record.push(match cell(name, p).map(|r| &r.accuracy) {
                Some(Ok(a)) => f17(*a),
                Some(Err(_)) => "ERR".to_string(),
                None => String::new(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<ablation csv>", e))?;
    Ok(())
}
