//! The `graphmil` command line. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage or configuration error |
//! | 2 | data or I/O error |
//! | 3 | numerical failure (non-finite loss, failed gradient check) |

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::data::{read_ppm, sample_patches, save_bag_csv, synth_mil_dataset, write_selection_csv, Dataset};
use crate::diffcore::Rng;
use crate::error::{Error, ErrorClass, Result};
use crate::fmt::F17;
use crate::harness::{
    accuracy, export_attention, export_embeddings, fit_model, gradient_suite, roc_auc, run_ablation, run_cv,
    score_bags, write_ablation_csv, write_attention_csv, write_embeddings_csv, write_roc_csv, CvOptions,
    LAYER_TOLERANCE,
};
use crate::model::checkpoint;

pub use config::{apply_override, output_path, parse_config, DataFormat, DatasetSpec, RunConfigFile};

pub const SEED_ENV: &str = "GRAPHMIL_SEED";

#[derive(Debug, Parser)]
#[command(name = "graphmil", version, about = "Graph neural network multiple instance learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set model.cheb_k=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory that receives every output of the run.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed for this command (base seed, model seed or generator seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Primary output file name inside the output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct Parallel {
    /// Worker threads for folds or grid cells. Results do not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model on the whole dataset and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a dataset with a saved checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write per-instance attention weights to this file.
        #[arg(long)]
        attention: Option<String>,
        /// Also write pooled bag embeddings to this file.
        #[arg(long)]
        embeddings: Option<String>,
    },
    /// Repeated group-disjoint k-fold cross-validation.
    Cv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// The 32-configuration architecture/pooling grid.
    Ablation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// Select tissue patches from a binary PPM image.
    SamplePatches {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Write a synthetic multiple instance dataset as bag CSV.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Run the gradient check suite over all layers and small models.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Cv { .. } => "cv",
            Command::Ablation { .. } => "ablation",
            Command::SamplePatches { .. } => "sample-patches",
            Command::Synth { .. } => "synth",
            Command::Gradcheck { .. } => "gradcheck",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Train { common }
            | Command::Eval { common, .. }
            | Command::Cv { common, .. }
            | Command::Ablation { common, .. }
            | Command::SamplePatches { common, .. }
            | Command::Synth { common }
            | Command::Gradcheck { common } => common,
        }
    }

    fn default_out(&self) -> &'static str {
        match self {
            Command::Train { .. } => "model.gmil",
            Command::Eval { .. } => "predictions.csv",
            Command::Cv { .. } => "report.json",
            Command::Ablation { .. } => "ablation.csv",
            Command::SamplePatches { .. } => "patches.csv",
            Command::Synth { .. } => "bags.csv",
            Command::Gradcheck { .. } => "gradcheck.json",
        }
    }

    fn jobs(&self) -> usize {
        match self {
            Command::Cv { parallel, .. } | Command::Ablation { parallel, .. } => parallel.jobs.max(1),
            _ => 1,
        }
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

/// Parse `args` (including the program name) and run. Diagnostics go to
/// stderr; the return value is the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.class())
        }
    }
}

/// Config file, then `--set` overrides, then the seed environment variable
/// (only if no base seed was given), then dedicated flags.
fn resolve(command: &Command) -> Result<RunConfigFile> {
    let common = command.common();
    let mut doc = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for assignment in &common.set {
        apply_override(&mut doc, assignment)?;
    }
    if doc.get("base_seed").is_none() {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed: u64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::config(SEED_ENV, format!("not an unsigned integer: `{raw}`")))?;
            doc.as_object_mut()
                .ok_or_else(|| Error::config("config", "top level must be an object"))?
                .insert("base_seed".into(), seed.into());
        }
    }
    let mut cfg = parse_config(doc)?;
    if let Some(dir) = &common.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if cfg.out.is_none() {
        cfg.out = Some(command.default_out().to_string());
    }
    if let Some(seed) = common.seed {
        match command {
            Command::Train { .. } => cfg.model.seed = seed,
            Command::Synth { .. } => cfg.dataset.seed = seed,
            _ => cfg.base_seed = seed,
        }
    }
    match command {
        Command::Eval { model, attention, embeddings, .. } => {
            if model.is_some() {
                cfg.checkpoint = model.clone();
            }
            if attention.is_some() {
                cfg.attention_out = attention.clone();
            }
            if embeddings.is_some() {
                cfg.embeddings_out = embeddings.clone();
            }
        }
        Command::SamplePatches { image, .. } if image.is_some() => cfg.image = image.clone(),
        _ => {}
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct InputRecord {
    role: &'static str,
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

fn hash_input(role: &'static str, path: &Path) -> Result<InputRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputRecord {
        role,
        path: path.display().to_string(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Inputs the command will read, checked for existence before any work.
fn inputs(command: &Command, cfg: &RunConfigFile) -> Result<Vec<(&'static str, PathBuf)>> {
    let mut list = Vec::new();
    if let Some(path) = &command.common().config {
        list.push(("config", path.clone()));
    }
    let need = |field: &str, value: &Option<PathBuf>| {
        value
            .clone()
            .ok_or_else(|| Error::config(field, format!("required by `{}`", command.name())))
    };
    match command {
        Command::Train { .. } | Command::Cv { .. } | Command::Ablation { .. } => {
            if cfg.dataset.format != DataFormat::Synth {
                list.push(("dataset", need("dataset.path", &cfg.dataset.path)?));
            }
        }
        Command::Eval { .. } => {
            list.push(("checkpoint", need("checkpoint", &cfg.checkpoint)?));
            if cfg.dataset.format != DataFormat::Synth {
                list.push(("dataset", need("dataset.path", &cfg.dataset.path)?));
            }
        }
        Command::SamplePatches { .. } => list.push(("image", need("image", &cfg.image)?)),
        Command::Synth { .. } | Command::Gradcheck { .. } => {}
    }
    for (role, path) in &list {
        if !path.is_file() {
            return Err(Error::Data(format!("{role} file `{}` does not exist", path.display())));
        }
    }
    Ok(list)
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let path = output_path(&self.dir, name)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.written.push(name.to_string());
        Ok(path)
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.path(name)?;
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Sibling file with a different extension, e.g. `patches.csv` to
/// `patches.json`.
fn with_extension(name: &str, ext: &str) -> String {
    Path::new(name).with_extension(ext).to_string_lossy().into_owned()
}

fn execute(command: &Command) -> Result<i32> {
    let cfg = resolve(command)?;
    let input_files = inputs(command, &cfg)?;
    let out_name = cfg.out.clone().expect("defaulted in resolve");
    output_path(&cfg.output_dir, &out_name)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut outputs = Outputs { dir: cfg.output_dir.clone(), written: Vec::new() };
    outputs.write("resolved_config.json", &json_bytes(&cfg)?)?;

    let (code, seed) = match command {
        Command::Train { .. } => (train(&cfg, &out_name, &mut outputs)?, cfg.model.seed),
        Command::Eval { .. } => (eval(&cfg, &out_name, &mut outputs)?, cfg.model.seed),
        Command::Cv { .. } => (cv(&cfg, command.jobs(), &out_name, &mut outputs)?, cfg.base_seed),
        Command::Ablation { .. } => (ablation(&cfg, command.jobs(), &out_name, &mut outputs)?, cfg.base_seed),
        Command::SamplePatches { .. } => (patches(&cfg, &out_name, &mut outputs)?, cfg.base_seed),
        Command::Synth { .. } => (synth(&cfg, &out_name, &mut outputs)?, cfg.dataset.seed),
        Command::Gradcheck { .. } => (gradcheck(&cfg, &out_name, &mut outputs)?, cfg.base_seed),
    };

    let manifest = Manifest {
        tool: "graphmil",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        seed,
        inputs: input_files
            .iter()
            .map(|(role, path)| hash_input(role, path))
            .collect::<Result<_>>()?,
        outputs: outputs.written.clone(),
    };
    outputs.write("manifest.json", &json_bytes(&manifest)?)?;
    Ok(code)
}

fn load_dataset(cfg: &RunConfigFile) -> Result<Dataset> {
    let data = cfg.dataset.load()?;
    log::info!(
        "dataset: {} bags ({} positive), {} instances, d = {}",
        data.len(),
        data.num_positive(),
        data.num_instances(),
        data.dim
    );
    Ok(data)
}

fn train(cfg: &RunConfigFile, out: &str, outputs: &mut Outputs) -> Result<i32> {
    let data = load_dataset(cfg)?;
    let bags: Vec<_> = data.bags.iter().collect();
    let (model, history) = fit_model(&cfg.model, &bags, cfg.model.seed, cfg.standardize)?;
    log::info!(
        "final epoch: loss {:.5}, train accuracy {:.4}",
        history.loss.last().copied().unwrap_or(f64::NAN),
        history.accuracy.last().copied().unwrap_or(f64::NAN)
    );
    outputs.write(out, checkpoint::to_string(&model)?.as_bytes())?;
    #[derive(Serialize)]
    struct History {
        loss: Vec<F17>,
        accuracy: Vec<F17>,
    }
    let history = History {
        loss: history.loss.into_iter().map(F17).collect(),
        accuracy: history.accuracy.into_iter().map(F17).collect(),
    };
    outputs.write("history.json", &json_bytes(&history)?)?;
    Ok(0)
}

fn eval(cfg: &RunConfigFile, out: &str, outputs: &mut Outputs) -> Result<i32> {
    let model = checkpoint::load(cfg.checkpoint.as_deref().expect("checked in inputs"))?;
    let data = load_dataset(cfg)?;
    if data.dim != model.input_dim {
        return Err(Error::Data(format!(
            "dataset has {} features, checkpoint expects {}",
            data.dim, model.input_dim
        )));
    }
    let bags: Vec<_> = data.bags.iter().collect();
    let scores = score_bags(&model, &bags)?;
    outputs.write_with(out, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["bag_id", "label", "score"])?;
        for s in &scores {
            w.write_record([s.bag_id.clone(), s.label.to_string(), crate::fmt::f17(s.score)])?;
        }
        w.flush().map_err(|e| Error::io("<predictions>", e))?;
        Ok(())
    })?;

    let probs: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let labels = data.labels();
    let acc = accuracy(&probs, &labels, 0.5)?;
    let roc = roc_auc(&probs, &labels).ok();
    log::info!("accuracy {acc:.4}, auc {}", roc.as_ref().map_or("n/a".into(), |r| format!("{:.4}", r.auc)));
    #[derive(Serialize)]
    struct Metrics {
        bags: usize,
        accuracy: F17,
        auc: Option<F17>,
    }
    let metrics = Metrics { bags: data.len(), accuracy: F17(acc), auc: roc.as_ref().map(|r| F17(r.auc)) };
    outputs.write("metrics.json", &json_bytes(&metrics)?)?;
    if let Some(roc) = &roc {
        outputs.write_with("roc.csv", |buf| write_roc_csv(roc, buf))?;
    }
    if let Some(name) = &cfg.attention_out {
        let rows = export_attention(&model, &data)?;
        outputs.write_with(name, |buf| write_attention_csv(&rows, buf))?;
    }
    if let Some(name) = &cfg.embeddings_out {
        let rows = export_embeddings(&model, &data)?;
        outputs.write_with(name, |buf| write_embeddings_csv(&rows, buf))?;
    }
    Ok(0)
}

fn cv(cfg: &RunConfigFile, jobs: usize, out: &str, outputs: &mut Outputs) -> Result<i32> {
    let data = load_dataset(cfg)?;
    let options = CvOptions {
        k: cfg.k,
        repeats: cfg.repeats,
        base_seed: cfg.base_seed,
        standardize: cfg.standardize,
        jobs,
    };
    let report = run_cv(&data, &cfg.model, &options)?;
    log::info!(
        "{}: accuracy {:.4} +/- {:.4}, auc {}",
        report.architecture,
        report.summary.mean_accuracy,
        report.summary.std_accuracy,
        report.summary.mean_auc.map_or("n/a".into(), |a| format!("{:.4}", a.0))
    );
    outputs.write(out, report.to_json()?.as_bytes())?;
    Ok(0)
}

fn ablation(cfg: &RunConfigFile, jobs: usize, out: &str, outputs: &mut Outputs) -> Result<i32> {
    let data = load_dataset(cfg)?;
    let rows = run_ablation(&data, &cfg.model, cfg.k, cfg.base_seed, jobs)?;
    let failed = rows.iter().filter(|r| r.accuracy.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} configurations failed", rows.len());
    }
    outputs.write_with(out, |buf| write_ablation_csv(&rows, buf))?;
    Ok(0)
}

fn patches(cfg: &RunConfigFile, out: &str, outputs: &mut Outputs) -> Result<i32> {
    let img = read_ppm(cfg.image.as_deref().expect("checked in inputs"))?;
    let selection = sample_patches(&img, &cfg.patches, &mut Rng::new(cfg.base_seed))?;
    log::info!(
        "{} of {} tiles are tissue, {} selected from {} clusters",
        selection.tissue_patches,
        selection.total_patches,
        selection.selections.len(),
        selection.clusters.len()
    );
    outputs.write_with(out, |buf| write_selection_csv(&selection, buf))?;
    outputs.write(&with_extension(out, "json"), &json_bytes(&selection.sidecar(&cfg.patches, &img))?)?;
    Ok(0)
}

fn synth(cfg: &RunConfigFile, out: &str, outputs: &mut Outputs) -> Result<i32> {
    let data = synth_mil_dataset(&cfg.dataset.synth, cfg.dataset.seed)?;
    let path = outputs.path(out)?;
    save_bag_csv(&data, &path)?;
    log::info!("wrote {} bags to {}", data.len(), path.display());
    Ok(0)
}

fn gradcheck(cfg: &RunConfigFile, out: &str, outputs: &mut Outputs) -> Result<i32> {
    let cases = gradient_suite(cfg.base_seed)?;
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        max_rel_error: F17,
        tolerance: F17,
        checked: usize,
        skipped: usize,
        nonzero_gradients: usize,
        passed: bool,
    }
    let rows: Vec<Row> = cases
        .iter()
        .map(|c| Row {
            name: &c.name,
            max_rel_error: F17(c.report.max_rel_error),
            tolerance: F17(c.tolerance()),
            checked: c.report.checked,
            skipped: c.report.skipped.len(),
            nonzero_gradients: c.active,
            passed: c.passed(),
        })
        .collect();
    for r in &rows {
        println!(
            "{:<32} {:.3e} (< {:.0e}) {:>4}/{:<4} nonzero {}",
            r.name,
            r.max_rel_error.0,
            r.tolerance.0,
            r.nonzero_gradients,
            r.checked + r.skipped,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    let max = cases.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    println!("max relative error: {max:.3e}");
    outputs.write(out, &json_bytes(&rows)?)?;
    Ok(if max < LAYER_TOLERANCE { 0 } else { exit_code(ErrorClass::Numerical) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_exits_zero_and_bad_flags_exit_one() {
        assert_eq!(run(["graphmil", "--help"]), 0);
        assert_eq!(run(["graphmil", "frobnicate"]), 1);
        assert_eq!(run(["graphmil", "cv", "--no-such-flag"]), 1);
    }

    #[test]
    fn sibling_extension() {
        assert_eq!(with_extension("sel.csv", "json"), "sel.json");
        assert_eq!(with_extension("a/b", "json"), "a/b.json");
    }
}
