//! Plain-text model checkpoints.
//!
//! ```text
//! GMIL1
//! input_dim <d>
//! config <ModelConfig as one-line JSON>
//! standardization <{"mean": [...], "std": [...]} or null>
//! params <count>
//! param <name> <rows> <cols> <trainable 0|1>
//! <rows*cols values, space separated, 17 significant digits>
//! ...
//! end
//! ```
//!
//! Loading rebuilds the architecture from the config and overwrites every
//! parameter by name, so files stay readable across refactors that keep the
//! parameter names.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::Standardization;
use crate::diffcore::Rng;
use crate::error::{Error, Result};
use crate::fmt::f17;

use super::{build_model, MilModel, ModelConfig};

pub const MAGIC: &str = "GMIL1";

pub fn to_string(model: &MilModel) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "input_dim {}", model.input_dim).unwrap();
    writeln!(out, "config {}", serde_json::to_string(&model.config)?).unwrap();
    writeln!(out, "standardization {}", serde_json::to_string(&model.standardization)?).unwrap();
    writeln!(out, "params {}", model.params().len()).unwrap();
    for p in model.params() {
        let (r, c) = p.tensor.shape();
        writeln!(out, "param {} {r} {c} {}", p.name, u8::from(p.trainable)).unwrap();
        let values: Vec<String> = p.tensor.data().iter().map(|&v| f17(v)).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
    writeln!(out, "end").unwrap();
    Ok(out)
}

pub fn save(model: &MilModel, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MilModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, &path.display().to_string())
}

pub fn from_str(text: &str, source: &str) -> Result<MilModel> {
    let err = |line: usize, reason: String| Error::Parse {
        path: source.to_string(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")));

    let (ln, magic) = next("magic")?;
    if magic.trim() != MAGIC {
        return Err(err(ln, format!("not a {MAGIC} checkpoint")));
    }
    let (ln, line) = next("input_dim")?;
    let input_dim: usize = line
        .strip_prefix("input_dim ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected `input_dim <d>`".into()))?;
    let (ln, line) = next("config")?;
    let config: ModelConfig = line
        .strip_prefix("config ")
        .ok_or_else(|| err(ln, "expected `config <json>`".into()))
        .and_then(|s| serde_json::from_str(s).map_err(|e| err(ln, e.to_string())))?;
    let (ln, line) = next("standardization")?;
    let standardization: Option<Standardization> = line
        .strip_prefix("standardization ")
        .ok_or_else(|| err(ln, "expected `standardization <json>`".into()))
        .and_then(|s| serde_json::from_str(s).map_err(|e| err(ln, e.to_string())))?;
    let (ln, line) = next("params")?;
    let count: usize = line
        .strip_prefix("params ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected `params <count>`".into()))?;

    let mut model = build_model(&config, input_dim, &mut Rng::new(0))?;
    if let Some(s) = &standardization {
        if s.mean.len() != input_dim || s.std.len() != input_dim {
            return Err(err(0, "standardization width does not match input_dim".into()));
        }
    }
    model.standardization = standardization;
    if count != model.params().len() {
        return Err(err(ln, format!("config implies {} parameters, file has {count}", model.params().len())));
    }
    for _ in 0..count {
        let (ln, header) = next("param header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "param" {
            return Err(err(ln, "expected `param <name> <rows> <cols> <trainable>`".into()));
        }
        let name = fields[1];
        let shape: (usize, usize) = (
            fields[2].parse().map_err(|_| err(ln, "bad rows".into()))?,
            fields[3].parse().map_err(|_| err(ln, "bad cols".into()))?,
        );
        let param = model
            .param(name)
            .ok_or_else(|| err(ln, format!("unknown parameter `{name}`")))?;
        if param.tensor.shape() != shape {
            return Err(err(ln, format!("parameter `{name}` has shape {shape:?}, model expects {:?}", param.tensor.shape())));
        }
        let (ln, body) = next("parameter values")?;
        let values = body
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| err(ln, format!("bad number `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        param.tensor.set_data(&values).map_err(|_| err(ln, format!("`{name}`: wrong value count {}", values.len())))?;
    }
    let (ln, end) = next("end")?;
    if end.trim() != "end" {
        return Err(err(ln, "expected `end`".into()));
    }
    Ok(model)
}
