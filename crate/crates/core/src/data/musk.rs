//! Loader for the UCI MUSK "clean1.data" format: one conformation per line,
//! `molecule,conformation,f1,...,f166,class`, where class is written `0.` or
//! `1.`. Conformations of one molecule form one bag.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Bag, Dataset};

pub fn load_musk1(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_musk(&text, &path.display().to_string())
}

pub fn parse_musk(text: &str, source: &str) -> Result<Dataset> {
    let err = |line: usize, reason: String| Error::Parse {
        path: source.to_string(),
        line,
        reason,
    };
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, (u8, Vec<Vec<f64>>)> = HashMap::new();
    let mut width: Option<usize> = None;

    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 4 {
            return Err(err(ln, format!("expected at least 4 fields, got {}", fields.len())));
        }
        let d = fields.len() - 3;
        match width {
            None => width = Some(d),
            Some(w) if w != d => return Err(err(ln, format!("row has {d} features, earlier rows have {w}"))),
            _ => {}
        }
        let features = fields[2..fields.len() - 1]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| err(ln, format!("non-numeric feature `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        let class_field = fields[fields.len() - 1];
        let class = match class_field.parse::<f64>() {
            Ok(0.0) => 0u8,
            Ok(1.0) => 1u8,
            _ => return Err(err(ln, format!("class must be 0 or 1, got `{class_field}`"))),
        };
        let molecule = fields[0].to_string();
        let entry = rows.entry(molecule.clone()).or_insert_with(|| {
            order.push(molecule);
            (0, Vec::new())
        });
        entry.0 = entry.0.max(class);
        entry.1.push(features);
    }
    if order.is_empty() {
        return Err(err(0, "no rows".into()));
    }
    let bags = order
        .into_iter()
        .map(|m| {
            let (label, instances) = rows.remove(&m).expect("inserted above");
            Bag::new(m.clone(), m, label, instances)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(bags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_molecule_two_conformations() {
        let text = "MUSK-188,188_1+1,46,-108,-60,1.\nMUSK-188,188_1+10,41,-188,-145,1.\n";
        let ds = parse_musk(text, "toy").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.bags[0].num_instances(), 2);
        assert_eq!(ds.bags[0].label, 1);
        assert_eq!(ds.bags[0].group_id, "MUSK-188");
        assert_eq!(ds.dim, 3);
        assert_eq!(ds.bags[0].instance(1), &[41.0, -188.0, -145.0]);
    }

    #[test]
    fn bags_keep_file_order_and_label_is_max() {
        let text = "B,b1,1,2,0.\nA,a1,3,4,0.\nB,b2,5,6,1.\n";
        let ds = parse_musk(text, "toy").unwrap();
        let ids: Vec<_> = ds.bags.iter().map(|b| b.bag_id.as_str()).collect();
        assert_eq!(ids, ["B", "A"]);
        assert_eq!(ds.labels(), vec![1, 0]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_musk("A,a1,1,2,0.\nA,a2,1,0.\n", "toy").unwrap_err();
        assert!(err.to_string().contains("toy:2"), "{err}");
    }

    #[test]
    fn non_numeric_reports_line() {
        let err = parse_musk("A,a1,1,2,0.\nA,a2,1,x,0.\n", "toy").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("toy:2") && msg.contains("`x`"), "{msg}");
    }

    #[test]
    fn bad_class_rejected() {
        assert!(parse_musk("A,a1,1,2,2.\n", "toy").is_err());
    }
}
