// SPDX-License-Identifier: Apache-2.0

//! Grouping lake tables into version families and building each family's
//! representative table.

mod defaults;
mod features;
mod train;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::synth::SyntheticLake;
use crate::table::{CellValue, ColType, Table, TableError};

pub use self::features::{ks_statistic, pair_features, profile_features, shares_token, FeatureVector, TableProfile};
pub use self::train::{
    loss, loss_and_gradient, parse_weights, score_pair, train_weights, write_weights, TrainOutcome, Weights,
    ITERATIONS, LEARNING_RATE,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("training failed: {0}")]
    Training(String),
    #[error("malformed weights: {0}")]
    Weights(String),
    #[error("malformed families manifest at line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VersionFamily {
    pub family_id: String,
    pub member_table_ids: BTreeSet<String>,
    /// Every scored pair inside the family, keyed by (smaller id, larger id).
    pub pair_scores: BTreeMap<(String, String), f64>,
}

/// `fam-` plus 16 hex digits of the hash of the sorted member ids.
pub fn family_id_for<'a>(members: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = members.into_iter().collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update([0]);
    }
    format!("fam-{}", &hex::encode(h.finalize())[..16])
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Candidate pairs `(i, j)`, `i < j`, sharing at least one header token.
pub fn blocked_pairs(profiles: &[TableProfile]) -> Vec<(usize, usize)> {
    let mut postings: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in profiles.iter().enumerate() {
        for t in p.tokens() {
            postings.entry(t.as_str()).or_default().push(i);
        }
    }
    let mut pairs = BTreeSet::new();
    for list in postings.values() {
        for (x, &i) in list.iter().enumerate() {
            for &j in &list[x + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    pairs.into_iter().collect()
}

/// Single-linkage families over edges scoring at least `threshold`. Output
/// is sorted by family id.
pub fn cluster_families(tables: &[Table], weights: &Weights, threshold: f64) -> Vec<VersionFamily> {
    let profiles: Vec<TableProfile> = tables.par_iter().map(TableProfile::new).collect();
    let pairs = blocked_pairs(&profiles);
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| score_pair(&profile_features(&profiles[i], &profiles[j]), weights))
        .collect();
    let mut parent: Vec<usize> = (0..tables.len()).collect();
    for (&(i, j), &s) in pairs.iter().zip(&scores) {
        if s >= threshold {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..tables.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let root_of: Vec<usize> = (0..tables.len()).map(|i| find(&mut parent, i)).collect();
    let mut pair_scores: HashMap<usize, BTreeMap<(String, String), f64>> = HashMap::new();
    for (&(i, j), &s) in pairs.iter().zip(&scores) {
        if root_of[i] == root_of[j] {
            let (a, b) = (&tables[i].table_id, &tables[j].table_id);
            let key = if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            pair_scores.entry(root_of[i]).or_default().insert(key, s);
        }
    }
    let mut out: Vec<VersionFamily> = groups
        .into_iter()
        .map(|(root, members)| {
            let ids: BTreeSet<String> = members.iter().map(|&i| tables[i].table_id.clone()).collect();
            VersionFamily {
                family_id: family_id_for(ids.iter().map(String::as_str)),
                member_table_ids: ids,
                pair_scores: pair_scores.remove(&root).unwrap_or_default(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.family_id.cmp(&b.family_id));
    out
}

/// Labeled training pairs from a synthetic lake: every same-family pair as a
/// positive and an equal number of sampled cross-family pairs that pass
/// blocking as negatives.
pub fn labeled_pairs(lake: &SyntheticLake, seed: u64) -> Vec<(FeatureVector, f64)> {
    let tables: Vec<&Table> = lake.tables().collect();
    let labels = lake.labels();
    let profiles: Vec<TableProfile> = tables.par_iter().map(|t| TableProfile::new(t)).collect();
    let label = |i: usize| labels[tables[i].table_id.as_str()];
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (i, j) in blocked_pairs(&profiles) {
        match (label(i), label(j)) {
            (Some(a), Some(b)) if a == b => positives.push((i, j)),
            _ => negatives.push((i, j)),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    negatives.shuffle(&mut rng);
    negatives.truncate(positives.len());
    positives
        .into_par_iter()
        .map(|p| (p, 1.0))
        .chain(negatives.into_par_iter().map(|p| (p, 0.0)))
        .map(|((i, j), y)| (profile_features(&profiles[i], &profiles[j]), y))
        .collect()
}

/// Pairwise precision, recall and F1 of a predicted partition against
/// ground-truth labels (`None` marks singletons).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn pairwise_f1(predicted: &[VersionFamily], labels: &HashMap<&str, Option<&str>>) -> PairwiseScore {
    let pairs = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
    let mut truth: HashMap<&str, usize> = HashMap::new();
    for l in labels.values().flatten() {
        *truth.entry(l).or_default() += 1;
    }
    let true_pairs: f64 = truth.values().map(|&n| pairs(n)).sum();
    let (mut predicted_pairs, mut tp) = (0.0, 0.0);
    for f in predicted {
        predicted_pairs += pairs(f.member_table_ids.len());
        let mut by_label: HashMap<&str, usize> = HashMap::new();
        for id in &f.member_table_ids {
            if let Some(Some(l)) = labels.get(id.as_str()) {
                *by_label.entry(l).or_default() += 1;
            }
        }
        tp += by_label.values().map(|&n| pairs(n)).sum::<f64>();
    }
    let precision = if predicted_pairs == 0.0 {
        1.0
    } else {
        tp / predicted_pairs
    };
    let recall = if true_pairs == 0.0 { 1.0 } else { tp / true_pairs };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PairwiseScore { precision, recall, f1 }
}

/// Union of a family's versions used as its discovery proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeTable {
    pub family_id: String,
    pub table: Table,
    /// Per row, the lineage ordinals of the versions containing it.
    pub provenance: Vec<BTreeSet<u32>>,
}

/// Unions `members` (in lineage order) onto the union of their schemas.
/// A header that reappears with a different type gets a `__2`, `__3`, ...
/// suffix.
pub fn build_representative(family_id: &str, members: &[&Table]) -> Result<RepresentativeTable, FamilyError> {
    let mut headers: Vec<String> = Vec::new();
    let mut types: Vec<ColType> = Vec::new();
    let mut maps: Vec<Vec<usize>> = Vec::with_capacity(members.len());
    for t in members {
        let mut map = Vec::with_capacity(t.arity());
        for (h, ty) in t.headers().iter().zip(t.col_types()) {
            let mut name = h.clone();
            let mut n = 1;
            let slot = loop {
                match headers.iter().position(|x| *x == name) {
                    Some(p) if types[p] == *ty && !map.contains(&p) => break p,
                    Some(_) => {
                        n += 1;
                        name = format!("{h}__{n}");
                    }
                    None => {
                        headers.push(name.clone());
                        types.push(*ty);
                        break headers.len() - 1;
                    }
                }
            };
            map.push(slot);
        }
        maps.push(map);
    }
    let mut rows: Vec<Vec<CellValue>> = Vec::new();
    let mut provenance: Vec<BTreeSet<u32>> = Vec::new();
    let mut index: HashMap<Vec<CellValue>, usize> = HashMap::new();
    for (k, (t, map)) in members.iter().zip(&maps).enumerate() {
        for row in t.rows() {
            let mut out = vec![CellValue::Null; headers.len()];
            for (c, &slot) in row.iter().zip(map) {
                out[slot] = c.clone();
            }
            match index.get(&out) {
                Some(&r) => {
                    provenance[r].insert(k as u32);
                }
                None => {
                    index.insert(out.clone(), rows.len());
                    rows.push(out);
                    provenance.push(BTreeSet::from([k as u32]));
                }
            }
        }
    }
    let table = Table::new(family_id, headers, types, rows)?;
    Ok(RepresentativeTable {
        family_id: family_id.to_string(),
        table,
        provenance,
    })
}

/// Families manifest: one `family_id<TAB>member,member,...` line per family.
pub fn write_families(families: &[VersionFamily]) -> String {
    families
        .iter()
        .map(|f| {
            let ids: Vec<&str> = f.member_table_ids.iter().map(String::as_str).collect();
            format!("{}\t{}\n", f.family_id, ids.join(","))
        })
        .collect()
}

/// Reads a families manifest. Pair scores are not persisted.
pub fn parse_families(text: &str) -> Result<Vec<VersionFamily>, FamilyError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        if line.contains(|c: char| c.is_control() && c != '\t') {
            return Err(FamilyError::Manifest {
                line: n + 1,
                message: "control character in manifest".into(),
            });
        }
        let (id, members) = line.split_once('\t').ok_or_else(|| FamilyError::Manifest {
            line: n + 1,
            message: "expected family_id<TAB>members".into(),
        })?;
        let member_table_ids: BTreeSet<String> =
            members.split(',').filter(|m| !m.is_empty()).map(String::from).collect();
        if member_table_ids.is_empty() {
            return Err(FamilyError::Manifest {
                line: n + 1,
                message: "family without members".into(),
            });
        }
        out.push(VersionFamily {
            family_id: id.to_string(),
            member_table_ids,
            pair_scores: BTreeMap::new(),
        });
    }
    Ok(out)
}
