//! Bag CSV: UTF-8 with header `bag_id,group_id,label,f0,...,f{d-1}` and one
//! instance per row. Rows of one bag need not be contiguous; bags keep the
//! order of their first row.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::f17;

use super::{Bag, Dataset};

const FIXED: [&str; 3] = ["bag_id", "group_id", "label"];

pub fn load_bag_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_bag_csv(file, &path.display().to_string())
}

pub fn read_bag_csv(reader: impl Read, source: &str) -> Result<Dataset> {
    let err = |line: usize, reason: String| Error::Parse {
        path: source.to_string(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(err(1, "empty file".into()));
    }
    for (i, name) in FIXED.iter().enumerate() {
        if header.get(i).map(str::trim) != Some(*name) {
            return Err(err(1, format!("missing column `{name}` at position {i}")));
        }
    }
    let d = header.len() - FIXED.len();
    if d == 0 {
        return Err(err(1, "no feature columns".into()));
    }

    struct Pending {
        group: String,
        label: u8,
        rows: Vec<Vec<f64>>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();

    for (i, record) in rdr.records().enumerate() {
        let ln = i + 2;
        let record = record.map_err(|e| err(ln, e.to_string()))?;
        if record.len() != header.len() {
            return Err(err(ln, format!("expected {} fields, got {}", header.len(), record.len())));
        }
        let label = match record[2].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => return Err(err(ln, format!("label must be 0 or 1, got `{other}`"))),
        };
        let features = (3..record.len())
            .map(|j| {
                let f = record[j].trim();
                f.parse::<f64>().map_err(|_| err(ln, format!("non-numeric feature `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let bag_id = record[0].trim().to_string();
        let group = record[1].trim().to_string();
        match pending.get_mut(&bag_id) {
            Some(p) => {
                if p.group != group || p.label != label {
                    return Err(err(ln, format!("bag `{bag_id}` has inconsistent group or label")));
                }
                p.rows.push(features);
            }
            None => {
                order.push(bag_id.clone());
                pending.insert(bag_id, Pending { group, label, rows: vec![features] });
            }
        }
    }
    if order.is_empty() {
        return Err(err(1, "no instances".into()));
    }
    let bags = order
        .into_iter()
        .map(|id| {
            let p = pending.remove(&id).expect("inserted above");
            Bag::new(id, p.group, p.label, p.rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(bags)
}

pub fn write_bag_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((0..dataset.dim).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for bag in &dataset.bags {
        for x in bag.instances() {
            let mut row = vec![bag.bag_id.clone(), bag.group_id.clone(), bag.label.to_string()];
            row.extend(x.iter().map(|&v| f17(v)));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<bag csv>", e))?;
    Ok(())
}

pub fn save_bag_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_bag_csv(dataset, std::io::BufWriter::new(file))
}
