// SPDX-License-Identifier: Apache-2.0

//! Pairwise similarity features between two tables.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::table::{header_tokens, infer_entity_key, CellValue, ColType, Table};

/// Seven similarity signals, each in `[0, 1]`. A missing signal is 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_jaccard: f64,
    pub header_token_jaccard: f64,
    pub mean_best_containment: f64,
    pub key_overlap_jaccard: f64,
    pub cell_multiset_jaccard: f64,
    pub numeric_distribution_similarity: f64,
    pub categorical_domain_jaccard: f64,
}

impl FeatureVector {
    pub const LEN: usize = 7;

    pub fn to_array(self) -> [f64; 7] {
        [
            self.schema_jaccard,
            self.header_token_jaccard,
            self.mean_best_containment,
            self.key_overlap_jaccard,
            self.cell_multiset_jaccard,
            self.numeric_distribution_similarity,
            self.categorical_domain_jaccard,
        ]
    }

    pub fn from_array(f: [f64; 7]) -> FeatureVector {
        FeatureVector {
            schema_jaccard: f[0],
            header_token_jaccard: f[1],
            mean_best_containment: f[2],
            key_overlap_jaccard: f[3],
            cell_multiset_jaccard: f[4],
            numeric_distribution_similarity: f[5],
            categorical_domain_jaccard: f[6],
        }
    }
}

/// Per-table summaries reused across every pair the table takes part in.
#[derive(Debug, Clone)]
pub struct TableProfile {
    pub table_id: String,
    headers: Vec<String>,
    types: Vec<ColType>,
    header_set: HashSet<String>,
    tokens: HashSet<String>,
    distinct: Vec<HashSet<CellValue>>,
    sorted_numeric: Vec<Vec<f64>>,
    key_values: Option<HashSet<CellValue>>,
    cells: HashMap<CellValue, usize>,
    cell_total: usize,
    /// Tie-break for canonical pair order when ids collide.
    fingerprint: Vec<String>,
}

impl TableProfile {
    pub fn new(t: &Table) -> TableProfile {
        let distinct: Vec<HashSet<CellValue>> = (0..t.arity())
            .map(|j| t.column(j).filter(|c| !c.is_null()).cloned().collect())
            .collect();
        let sorted_numeric = (0..t.arity())
            .map(|j| {
                let mut v: Vec<f64> = t.column(j).filter_map(CellValue::as_f64).collect();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect();
        let mut cells = HashMap::new();
        let mut cell_total = 0;
        for row in t.rows() {
            for c in row.iter().filter(|c| !c.is_null()) {
                *cells.entry(c.clone()).or_default() += 1;
                cell_total += 1;
            }
        }
        let mut fingerprint = t.headers().to_vec();
        fingerprint.extend(t.rows().iter().flatten().map(CellValue::render));
        TableProfile {
            table_id: t.table_id.clone(),
            headers: t.headers().to_vec(),
            types: t.col_types().to_vec(),
            header_set: t.headers().iter().cloned().collect(),
            tokens: t
                .headers()
                .iter()
                .flat_map(|h| header_tokens(h))
                .map(String::from)
                .collect(),
            distinct,
            sorted_numeric,
            key_values: infer_entity_key(t).map(|k| t.column(k.column_index).cloned().collect()),
            cells,
            cell_total,
            fingerprint,
        }
    }

    pub fn tokens(&self) -> &HashSet<String> {
        &self.tokens
    }

    fn canonical_cmp(&self, other: &TableProfile) -> Ordering {
        self.table_id
            .cmp(&other.table_id)
            .then_with(|| self.fingerprint.cmp(&other.fingerprint))
    }
}

fn jaccard<T: std::hash::Hash + Eq>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.len() + b.len() - a.intersection(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

fn containment(a: &HashSet<CellValue>, b: &HashSet<CellValue>) -> f64 {
    let small = a.len().min(b.len());
    if small == 0 {
        return 0.0;
    }
    let (s, l) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    s.iter().filter(|v| l.contains(v)).count() as f64 / small as f64
}

/// Two-sample Kolmogorov-Smirnov statistic over sorted samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Greedy one-to-one column matching by descending containment. Columns
/// with equal names may pair at zero containment.
fn match_columns(a: &TableProfile, b: &TableProfile) -> Vec<(usize, usize, f64)> {
    let mut cands = Vec::new();
    for i in 0..a.headers.len() {
        for j in 0..b.headers.len() {
            let c = containment(&a.distinct[i], &b.distinct[j]);
            let same_name = a.headers[i] == b.headers[j];
            if c > 0.0 || same_name {
                cands.push((c, same_name, i, j));
            }
        }
    }
    cands.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then(y.1.cmp(&x.1))
            .then((x.2, x.3).cmp(&(y.2, y.3)))
    });
    let (mut used_a, mut used_b) = (vec![false; a.headers.len()], vec![false; b.headers.len()]);
    let mut out = Vec::new();
    for (c, _, i, j) in cands {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, c));
        }
    }
    out
}

pub fn profile_features(a: &TableProfile, b: &TableProfile) -> FeatureVector {
    let (a, b) = if a.canonical_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let matched = match_columns(a, b);

    let min_arity = a.headers.len().min(b.headers.len());
    let mean_best_containment = if min_arity == 0 {
        0.0
    } else {
        matched.iter().map(|m| m.2).sum::<f64>() / min_arity as f64
    };

    let key_overlap_jaccard = match (&a.key_values, &b.key_values) {
        (Some(x), Some(y)) => jaccard(x, y),
        _ => 0.0,
    };

    let shared: usize = a
        .cells
        .iter()
        .map(|(v, n)| b.cells.get(v).map_or(0, |m| (*n).min(*m)))
        .sum();
    let union = a.cell_total + b.cell_total - shared;
    let cell_multiset_jaccard = if union == 0 { 0.0 } else { shared as f64 / union as f64 };

    let (mut numeric, mut n_numeric, mut categorical, mut n_categorical) = (0.0, 0usize, 0.0, 0usize);
    for &(i, j, _) in &matched {
        match (a.types[i], b.types[j]) {
            (x, y) if x.is_numeric() && y.is_numeric() => {
                numeric += 1.0 - ks_statistic(&a.sorted_numeric[i], &b.sorted_numeric[j]);
                n_numeric += 1;
            }
            (ColType::Text, ColType::Text) => {
                categorical += jaccard(&a.distinct[i], &b.distinct[j]);
                n_categorical += 1;
            }
            _ => {}
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };

    let clamp = |v: f64| v.clamp(0.0, 1.0);
    FeatureVector {
        schema_jaccard: clamp(jaccard(&a.header_set, &b.header_set)),
        header_token_jaccard: clamp(jaccard(&a.tokens, &b.tokens)),
        mean_best_containment: clamp(mean_best_containment),
        key_overlap_jaccard: clamp(key_overlap_jaccard),
        cell_multiset_jaccard: clamp(cell_multiset_jaccard),
        numeric_distribution_similarity: clamp(mean(numeric, n_numeric)),
        categorical_domain_jaccard: clamp(mean(categorical, n_categorical)),
    }
}

pub fn pair_features(a: &Table, b: &Table) -> FeatureVector {
    profile_features(&TableProfile::new(a), &TableProfile::new(b))
}

/// Whether two tables share a header token (the blocking rule).
pub fn shares_token(a: &TableProfile, b: &TableProfile) -> bool {
    a.tokens.iter().any(|t| b.tokens.contains(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(id: &str, src: &str) -> Table {
        Table::from_csv(id, src.as_bytes()).unwrap()
    }

    #[test]
    fn schema_jaccard_example() {
        let a = t("a", "player,team,points\nx,y,1\n");
        let b = t("b", "player,team,position,points\nx,y,F,1\n");
        assert_eq!(pair_features(&a, &b).schema_jaccard, 0.75);
    }

    #[test]
    fn ks() {
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0]), 0.5);
    }

    #[test]
    fn identical_tables() {
        let a = t("a", "player,team,points\nx,LAL,1.5\ny,BOS,2.5\n");
        let f = pair_features(&a, &a.clone().with_id("b"));
        assert_eq!(f.to_array(), [1.0; 7]);
    }

    #[test]
    fn empty_tables_are_zero() {
        let a = t("a", "x\n");
        let f = pair_features(&a, &t("b", "y\n"));
        assert_eq!(f.to_array(), [0.0; 7]);
    }
}
