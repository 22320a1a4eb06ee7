use std::collections::HashMap;

use crate::diffcore::Rng;
use crate::error::{Error, Result};

use super::Dataset;

/// One cross-validation split, as indices into `Dataset::bags`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Group-disjoint, class-stratified k-fold split.
///
/// Groups are shuffled with `seed`, stably sorted by size (largest first) and
/// then assigned greedily to the fold whose per-class counts move least away
/// from the per-fold target `count_c / k`. Ties go to the fold with fewer
/// bags, then the lower index.
pub fn stratified_group_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::config("folds", format!("k must be at least 2, got {k}")));
    }
    let mut group_index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, bag) in dataset.bags.iter().enumerate() {
        let g = *group_index.entry(bag.group_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    if groups.len() < k {
        return Err(Error::Data(format!(
            "cannot make {k} folds from {} groups",
            groups.len()
        )));
    }

    let mut rng = Rng::new(seed);
    rng.shuffle(&mut groups);
    groups.sort_by_key(|g| std::cmp::Reverse(g.len()));

    let labels = dataset.labels();
    let mut totals = [0.0f64; 2];
    for &l in &labels {
        totals[l as usize] += 1.0;
    }
    let target = [totals[0] / k as f64, totals[1] / k as f64];
    let mut counts = vec![[0usize; 2]; k];
    let mut test: Vec<Vec<usize>> = vec![Vec::new(); k];

    for group in &groups {
        let mut add = [0usize; 2];
        for &i in group {
            add[labels[i] as usize] += 1;
        }
        let cost = |f: usize| -> f64 {
            (0..2)
                .map(|c| {
                    let before = counts[f][c] as f64 - target[c];
                    let after = before + add[c] as f64;
                    after * after - before * before
                })
                .sum()
        };
        let best = (0..k)
            .min_by(|&a, &b| {
                cost(a)
                    .total_cmp(&cost(b))
                    .then(test[a].len().cmp(&test[b].len()))
                    .then(a.cmp(&b))
            })
            .expect("k >= 2");
        counts[best][0] += add[0];
        counts[best][1] += add[1];
        test[best].extend_from_slice(group);
    }

    let n = dataset.len();
    Ok(test
        .into_iter()
        .map(|mut t| {
            t.sort_unstable();
            let mut in_test = vec![false; n];
            t.iter().for_each(|&i| in_test[i] = true);
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test: t }
        })
        .collect())
}
