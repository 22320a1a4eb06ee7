use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{stratified_group_kfold, Bag, Dataset, Standardization};
use crate::diffcore::Rng;
use crate::error::{Error, Result};
use crate::fmt::{serialize_f17, F17};
use crate::model::{build_model, train, MilModel, ModelConfig, TrainHistory};

use super::metrics::{accuracy, roc_auc};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CvOptions {
    pub k: usize,
    pub repeats: usize,
    pub base_seed: u64,
    /// Fit per-feature standardization on each training fold.
    pub standardize: bool,
    /// Worker threads; results do not depend on this.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 10,
            repeats: 5,
            base_seed: 0,
            standardize: true,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BagScore {
    pub bag_id: String,
    pub label: u8,
    #[serde(serialize_with = "serialize_f17")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    /// Seed of this repeat; it drives the split and the per-fold model seeds.
    pub seed: u64,
    pub train_size: usize,
    #[serde(serialize_with = "serialize_f17")]
    pub final_train_loss: f64,
    #[serde(serialize_with = "serialize_f17")]
    pub accuracy: f64,
    /// `None` when the test fold holds a single class.
    pub auc: Option<F17>,
    pub bags: Vec<BagScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    #[serde(serialize_with = "serialize_f17")]
    pub mean_accuracy: f64,
    #[serde(serialize_with = "serialize_f17")]
    pub std_accuracy: f64,
    pub mean_auc: Option<F17>,
    pub std_auc: Option<F17>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub bags: usize,
    pub positive: usize,
    pub instances: usize,
    pub dim: usize,
}

/// Everything a cross-validation run produced. Contains no timings or
/// paths, so identical inputs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub options: CvOptions,
    pub architecture: String,
    pub config: ModelConfig,
    pub dataset: DatasetInfo,
    pub summary: Summary,
    pub folds: Vec<FoldResult>,
}

impl CvReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_json()?.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Build and train a model on `bags`, fitting standardization on them first
/// when `standardize` is set. The model carries the fitted statistics.
pub fn fit_model(config: &ModelConfig, bags: &[&Bag], seed: u64, standardize: bool) -> Result<(MilModel, TrainHistory)> {
    let dim = bags
        .first()
        .map(|b| b.dim())
        .ok_or_else(|| Error::Data("no training bags".into()))?;
    let mut rng = Rng::new(seed);
    let mut model = build_model(config, dim, &mut rng)?;
    let history = if standardize {
        let stats = Standardization::fit(bags.iter().copied(), dim)?;
        let scaled: Vec<Bag> = bags.iter().map(|b| stats.apply(b)).collect();
        let refs: Vec<&Bag> = scaled.iter().collect();
        let history = train(&mut model, &refs, &mut rng)?;
        model.standardization = Some(stats);
        history
    } else {
        train(&mut model, bags, &mut rng)?
    };
    Ok((model, history))
}

/// Scores (probabilities) for `bags` in evaluation mode.
pub fn score_bags(model: &MilModel, bags: &[&Bag]) -> Result<Vec<BagScore>> {
    bags.iter()
        .map(|b| {
            Ok(BagScore {
                bag_id: b.bag_id.clone(),
                label: b.label,
                score: model.predict(b)?.prob,
            })
        })
        .collect()
}

struct Job {
    repeat: usize,
    fold: usize,
    seed: u64,
    model_seed: u64,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn run_job(dataset: &Dataset, config: &ModelConfig, standardize: bool, job: &Job) -> Result<FoldResult> {
    let train_bags = dataset.subset(&job.train);
    let test_bags = dataset.subset(&job.test);
    let (model, history) = fit_model(config, &train_bags, job.model_seed, standardize)?;
    let bags = score_bags(&model, &test_bags)?;
    let scores: Vec<f64> = bags.iter().map(|b| b.score).collect();
    let labels: Vec<u8> = bags.iter().map(|b| b.label).collect();
    let acc = accuracy(&scores, &labels, 0.5)?;
    let auc = roc_auc(&scores, &labels).ok().map(|r| F17(r.auc));
    log::info!(
        "repeat {} fold {}: accuracy {:.4} auc {}",
        job.repeat,
        job.fold,
        acc,
        auc.map_or("n/a".to_string(), |a| format!("{:.4}", a.0))
    );
    Ok(FoldResult {
        repeat: job.repeat,
        fold: job.fold,
        seed: job.seed,
        train_size: job.train.len(),
        final_train_loss: history.loss.last().copied().unwrap_or(f64::NAN),
        accuracy: acc,
        auc,
        bags,
    })
}

pub(crate) fn run_parallel<T: Send, R: Send>(
    jobs: usize,
    items: Vec<T>,
    f: impl Fn(T) -> R + Sync + Send,
) -> Result<Vec<R>> {
    if jobs <= 1 {
        return Ok(items.into_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

/// Repeated group-disjoint k-fold cross-validation. Repeat `r` uses seed
/// `base_seed + r` for its split; each fold's model seed is drawn from a
/// generator seeded with the same value.
pub fn run_cv(dataset: &Dataset, config: &ModelConfig, options: &CvOptions) -> Result<CvReport> {
    config.validate()?;
    if options.repeats == 0 {
        return Err(Error::config("repeats", "must be at least 1"));
    }
    let mut jobs = Vec::new();
    for repeat in 0..options.repeats {
        let seed = options.base_seed.wrapping_add(repeat as u64);
        let folds = stratified_group_kfold(dataset, options.k, seed)?;
        let mut seeder = Rng::new(seed);
        for (fold, split) in folds.into_iter().enumerate() {
            jobs.push(Job {
                repeat,
                fold,
                seed,
                model_seed: seeder.next_u64(),
                train: split.train,
                test: split.test,
            });
        }
    }
    let folds = run_parallel(options.jobs, jobs, |job| run_job(dataset, config, options.standardize, &job))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc.map(|a| a.0)).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let (mean_auc, std_auc) = if aucs.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&aucs);
        (Some(F17(m)), Some(F17(s)))
    };
    Ok(CvReport {
        options: options.clone(),
        architecture: config.architecture_name(),
        config: config.clone(),
        dataset: DatasetInfo {
            bags: dataset.len(),
            positive: dataset.num_positive(),
            instances: dataset.num_instances(),
            dim: dataset.dim,
        },
        summary: Summary {
            mean_accuracy,
            std_accuracy,
            mean_auc,
            std_auc,
        },
        folds,
    })
}
