use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{load_bag_csv, load_musk1, synth_mil_dataset, Dataset, PatchConfig, SynthConfig};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Musk1,
    BagCsv,
    #[default]
    Synth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub format: DataFormat,
    /// Input file for `musk1` and `bag_csv`.
    pub path: Option<PathBuf>,
    /// Generator settings for `synth`.
    pub synth: SynthConfig,
    /// Generator seed for `synth`.
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            format: DataFormat::Synth,
            path: None,
            synth: SynthConfig::default(),
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self.format {
            DataFormat::Musk1 => load_musk1(self.required_path()?),
            DataFormat::BagCsv => load_bag_csv(self.required_path()?),
            DataFormat::Synth => synth_mil_dataset(&self.synth, self.seed),
        }
    }

    fn required_path(&self) -> Result<&Path> {
        self.path
            .as_deref()
            .ok_or_else(|| Error::config("dataset.path", "required for this dataset format"))
    }

    pub fn input_file(&self) -> Option<&Path> {
        match self.format {
            DataFormat::Synth => None,
            _ => self.path.as_deref(),
        }
    }
}

/// Everything one run needs. Every subcommand reads the sections it uses;
/// command-line flags are shorthands that write into this record, and the
/// record written to `resolved_config.json` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    pub k: usize,
    pub repeats: usize,
    pub base_seed: u64,
    pub standardize: bool,
    pub output_dir: PathBuf,
    /// Primary output file name, relative to `output_dir`.
    pub out: Option<String>,
    pub patches: PatchConfig,
    /// Input image for `sample-patches`.
    pub image: Option<PathBuf>,
    /// Input checkpoint for `eval`.
    pub checkpoint: Option<PathBuf>,
    pub attention_out: Option<String>,
    pub embeddings_out: Option<String>,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        RunConfigFile {
            dataset: DatasetSpec::default(),
            model: ModelConfig::default(),
            k: 10,
            repeats: 5,
            base_seed: 0,
            standardize: true,
            output_dir: PathBuf::from("."),
            out: None,
            patches: PatchConfig::default(),
            image: None,
            checkpoint: None,
            attention_out: None,
            embeddings_out: None,
        }
    }
}

/// Apply `key.path=value` to a JSON document. The value is parsed as JSON
/// and taken as a plain string when that fails.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Invalid(format!("--set: empty path segment in `{key}`")));
        }
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::Invalid(format!("--set: `{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}

/// Parse a config document (after overrides). Unknown keys are rejected.
pub fn parse_config(doc: Value) -> Result<RunConfigFile> {
    serde_json::from_value(doc).map_err(|e| Error::config("config", e.to_string()))
}

/// A file name inside the output directory: relative, without `..`.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    let rel = Path::new(name);
    let ok = !name.is_empty()
        && rel
            .components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if !ok {
        return Err(Error::config(
            "out",
            format!("`{name}` must be a relative path inside the output directory"),
        ));
    }
    Ok(dir.join(rel))
}
