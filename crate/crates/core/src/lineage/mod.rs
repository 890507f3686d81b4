// SPDX-License-Identifier: Apache-2.0

//! Chronological ordering of a family's versions and per-step change-log
//! synthesis.

mod affine;
mod diff;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{detect_temporal_columns, parse_timestamp, CellValue, ColType, Table};

pub use self::affine::{fit_affine, AffineFit};
pub use self::diff::synthesize_changelog;

#[derive(Debug, Error, PartialEq)]
pub enum LineageError {
    #[error("need at least two paired points, got {0}")]
    InsufficientData(usize),
    #[error("x is constant; the fit is degenerate")]
    DegenerateFit,
    #[error("signal unavailable: {0}")]
    SignalUnavailable(String),
    #[error("synthesized log for {older} -> {newer} does not replay: {reason}")]
    Synthesis {
        older: String,
        newer: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signal {
    Temporal,
    Subsumption,
    Drift,
    Tiebreak,
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Temporal => "TEMPORAL",
            Signal::Subsumption => "SUBSUMPTION",
            Signal::Drift => "DRIFT",
            Signal::Tiebreak => "TIEBREAK",
        })
    }
}

impl std::str::FromStr for Signal {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "TEMPORAL" => Ok(Signal::Temporal),
            "SUBSUMPTION" => Ok(Signal::Subsumption),
            "DRIFT" => Ok(Signal::Drift),
            "TIEBREAK" => Ok(Signal::Tiebreak),
            _ => Err(format!("unknown signal {s}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub signal: Signal,
    pub confidence: f64,
}

/// Inferred chronological order of one family. `evidence[k]` explains the
/// step from `order[k]` to `order[k + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub family_id: String,
    pub order: Vec<String>,
    pub evidence: Vec<Evidence>,
}

/// Global (min, max) over every detected temporal column.
pub fn temporal_extent(t: &Table) -> Option<(i64, i64)> {
    let mut out: Option<(i64, i64)> = None;
    for c in detect_temporal_columns(t) {
        for cell in t.column(c.column_index) {
            let ts = match cell {
                CellValue::Timestamp(s) => Some(*s),
                CellValue::Text(s) => parse_timestamp(s),
                _ => None,
            };
            if let Some(ts) = ts {
                out = Some(out.map_or((ts, ts), |(lo, hi)| (lo.min(ts), hi.max(ts))));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsumption {
    AInB,
    BInA,
    Equal,
    None,
}

/// Whether `small`'s headers and row multiset (projected on them) are
/// contained in `big`.
fn contained(small: &Table, big: &Table) -> bool {
    let Some(cols): Option<Vec<usize>> = small.headers().iter().map(|h| big.column_index(h)).collect() else {
        return false;
    };
    if small.row_count() > big.row_count() {
        return false;
    }
    let mut counts: HashMap<Vec<&CellValue>, usize> = HashMap::new();
    for row in big.rows() {
        *counts.entry(cols.iter().map(|&j| &row[j]).collect()).or_default() += 1;
    }
    small
        .rows()
        .iter()
        .all(|row| match counts.get_mut(&row.iter().collect::<Vec<_>>()) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        })
}

pub fn subsumption_relation(a: &Table, b: &Table) -> Subsumption {
    match (contained(a, b), contained(b, a)) {
        (true, true) => Subsumption::Equal,
        (true, false) => Subsumption::AInB,
        (false, true) => Subsumption::BInA,
        (false, false) => Subsumption::None,
    }
}

fn unique_non_null(t: &Table, j: usize) -> bool {
    let mut seen = HashSet::with_capacity(t.row_count());
    t.column(j).all(|c| !c.is_null() && seen.insert(c))
}

/// Entity-key column pair shared by two versions: same name and type, unique
/// and non-Null in both. Text columns win, then larger value overlap, then
/// the leftmost column of `a`.
pub fn shared_key(a: &Table, b: &Table) -> Option<(usize, usize)> {
    shared_key_among(
        a,
        b,
        a.headers()
            .iter()
            .filter_map(|h| Some((a.column_index(h)?, b.column_index(h)?))),
    )
}

pub(crate) fn shared_key_among(
    a: &Table,
    b: &Table,
    pairs: impl Iterator<Item = (usize, usize)>,
) -> Option<(usize, usize)> {
    let mut best: Option<((bool, usize), (usize, usize))> = None;
    for (i, j) in pairs {
        if a.col_types()[i] != b.col_types()[j] || !unique_non_null(a, i) || !unique_non_null(b, j) {
            continue;
        }
        if a.row_count() == 0 || b.row_count() == 0 {
            continue;
        }
        let left: HashSet<&CellValue> = a.column(i).collect();
        let overlap = b.column(j).filter(|v| left.contains(v)).count();
        let score = (a.col_types()[i] == ColType::Text, overlap);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, (i, j)));
        }
    }
    best.map(|(_, p)| p)
}

/// One drift verdict between two members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEdge {
    /// Member indices.
    pub older: usize,
    pub newer: usize,
    /// Fraction of shared entities that did not decrease.
    pub confidence: f64,
    /// Fraction of shared entities whose value changed.
    pub changed: f64,
}

pub const DRIFT_THRESHOLD: f64 = 0.9;

fn drift_pair(a: &Table, b: &Table, column: &str) -> Option<(bool, f64, f64)> {
    let (ca, cb) = (a.column_index(column)?, b.column_index(column)?);
    if !a.col_types()[ca].is_numeric() || !b.col_types()[cb].is_numeric() {
        return None;
    }
    let (ka, kb) = shared_key(a, b)?;
    let values: HashMap<&CellValue, f64> = a
        .rows()
        .iter()
        .filter_map(|r| Some((&r[ka], r[ca].as_f64()?)))
        .collect();
    let (mut n, mut up, mut down, mut changed, mut delta) = (0usize, 0usize, 0usize, 0usize, 0.0);
    for r in b.rows() {
        let (Some(va), Some(vb)) = (values.get(&r[kb]), r[cb].as_f64()) else {
            continue;
        };
        n += 1;
        up += (vb >= *va) as usize;
        down += (vb <= *va) as usize;
        changed += (vb != *va) as usize;
        delta += vb - va;
    }
    if n == 0 {
        return None;
    }
    let (n_f, d) = (n as f64, delta / n as f64);
    let changed = changed as f64 / n_f;
    if up as f64 / n_f >= DRIFT_THRESHOLD && d > 0.0 {
        Some((true, up as f64 / n_f, changed))
    } else if down as f64 / n_f >= DRIFT_THRESHOLD && d < 0.0 {
        Some((false, down as f64 / n_f, changed))
    } else {
        None
    }
}

/// Pairwise drift verdicts on `column` over all member pairs.
pub fn drift_order(members: &[&Table], column: &str) -> Result<Vec<DriftEdge>, LineageError> {
    let numeric = members
        .iter()
        .filter(|t| t.column_index(column).is_some_and(|j| t.col_types()[j].is_numeric()))
        .count();
    if numeric == 0 {
        return Err(LineageError::SignalUnavailable(format!(
            "no member has numeric column {column}"
        )));
    }
    let mut out = Vec::new();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if let Some((forward, confidence, changed)) = drift_pair(members[i], members[j], column) {
                let (older, newer) = if forward { (i, j) } else { (j, i) };
                out.push(DriftEdge {
                    older,
                    newer,
                    confidence,
                    changed,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Verdict {
    older: usize,
    newer: usize,
    evidence: Evidence,
}

fn tiebreak_older(members: &[&Table], i: usize, j: usize) -> bool {
    let key = |t: &Table| (t.cell_count(), t.table_id.clone());
    key(members[i]) <= key(members[j])
}

fn pair_verdict(members: &[&Table], extents: &[Option<(i64, i64)>], i: usize, j: usize) -> Verdict {
    let verdict = |forward: bool, signal, confidence| {
        let (older, newer) = if forward { (i, j) } else { (j, i) };
        Verdict {
            older,
            newer,
            evidence: Evidence { signal, confidence },
        }
    };
    if let (Some((_, ma)), Some((_, mb))) = (extents[i], extents[j]) {
        if ma != mb {
            return verdict(ma < mb, Signal::Temporal, 1.0);
        }
    }
    match subsumption_relation(members[i], members[j]) {
        Subsumption::AInB => return verdict(true, Signal::Subsumption, 1.0),
        Subsumption::BInA => return verdict(false, Signal::Subsumption, 1.0),
        _ => {}
    }
    // Weighted vote across shared numeric columns. A column's vote counts in
    // proportion to how many shared entities it moved, so a single edited cell
    // cannot outvote a column that shifted for everyone.
    let (a, b) = (members[i], members[j]);
    let mut signed = 0.0;
    let mut total = 0.0;
    for h in a.headers() {
        if b.column_index(h).is_none() {
            continue;
        }
        if let Some((forward, p, changed)) = drift_pair(a, b, h) {
            let w = p * changed;
            signed += if forward { w } else { -w };
            total += w;
        }
    }
    if total > 0.0 && signed != 0.0 {
        return verdict(signed > 0.0, Signal::Drift, signed.abs() / total);
    }
    verdict(tiebreak_older(members, i, j), Signal::Tiebreak, 0.0)
}

fn find_cycle(n: usize, edges: &[Verdict]) -> Option<Vec<usize>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, v) in edges.iter().enumerate() {
        adj[v.older].push((v.newer, e));
    }
    // 0 = unvisited, 1 = on stack, 2 = done.
    let mut state = vec![0u8; n];
    let mut stack_edges: Vec<usize> = Vec::new();
    fn dfs(
        u: usize,
        adj: &[Vec<(usize, usize)>],
        edges: &[Verdict],
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[u] = 1;
        for &(v, e) in &adj[u] {
            if state[v] == 1 {
                let start = stack.iter().position(|&se| edges[se].older == v).unwrap_or(stack.len());
                let mut cycle = stack[start..].to_vec();
                cycle.push(e);
                return Some(cycle);
            }
            if state[v] == 0 {
                stack.push(e);
                if let Some(c) = dfs(v, adj, edges, state, stack) {
                    return Some(c);
                }
                stack.pop();
            }
        }
        state[u] = 2;
        None
    }
    for s in 0..n {
        if state[s] == 0 {
            if let Some(c) = dfs(s, &adj, edges, &mut state, &mut stack_edges) {
                return Some(c);
            }
        }
    }
    None
}

/// Orders a family from oldest to newest.
pub fn infer_lineage(family_id: &str, members: &[&Table]) -> Lineage {
    let n = members.len();
    let extents: Vec<_> = members.iter().map(|t| temporal_extent(t)).collect();
    let mut verdicts = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            verdicts.push(pair_verdict(members, &extents, i, j));
        }
    }
    let by_pair: HashMap<(usize, usize), Verdict> = verdicts
        .iter()
        .map(|v| ((v.older.min(v.newer), v.older.max(v.newer)), *v))
        .collect();

    let mut edges = verdicts;
    while let Some(cycle) = find_cycle(n, &edges) {
        let drop = cycle
            .into_iter()
            .min_by(|&x, &y| {
                let key = |e: usize| {
                    let v = &edges[e];
                    (
                        v.evidence.confidence,
                        &members[v.older].table_id,
                        &members[v.newer].table_id,
                    )
                };
                let (kx, ky) = (key(x), key(y));
                kx.0.total_cmp(&ky.0).then_with(|| (kx.1, kx.2).cmp(&(ky.1, ky.2)))
            })
            .expect("cycles are non-empty");
        edges.remove(drop);
    }

    // Kahn's algorithm; ready nodes are taken by the tiebreak order.
    let mut indegree = vec![0usize; n];
    for e in &edges {
        indegree[e.newer] += 1;
    }
    let rank = |i: usize| (members[i].cell_count(), members[i].table_id.clone());
    let mut ready: BTreeSet<((usize, String), usize)> =
        (0..n).filter(|&i| indegree[i] == 0).map(|i| (rank(i), i)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(first) = ready.pop_first() {
        let u = first.1;
        order.push(u);
        for e in edges.iter().filter(|e| e.older == u) {
            indegree[e.newer] -= 1;
            if indegree[e.newer] == 0 {
                ready.insert((rank(e.newer), e.newer));
            }
        }
    }
    debug_assert_eq!(order.len(), n);

    let evidence = order
        .windows(2)
        .map(|w| {
            let v = by_pair[&(w[0].min(w[1]), w[0].max(w[1]))];
            if v.older == w[0] {
                v.evidence
            } else {
                Evidence {
                    signal: Signal::Tiebreak,
                    confidence: 0.0,
                }
            }
        })
        .collect();
    Lineage {
        family_id: family_id.to_string(),
        order: order.into_iter().map(|i| members[i].table_id.clone()).collect(),
        evidence,
    }
}

/// Kendall rank correlation between an inferred order and the true order of
/// the same ids. Orders of fewer than two items score 1.
pub fn kendall_tau(inferred: &[String], truth: &[String]) -> f64 {
    let pos: HashMap<&String, usize> = inferred.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let n = truth.len();
    if n < 2 {
        return 1.0;
    }
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            score += if pos[&truth[i]] < pos[&truth[j]] { 1 } else { -1 };
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(id: &str, src: &str) -> Table {
        Table::from_csv(id, src.as_bytes()).unwrap()
    }

    #[test]
    fn extents() {
        let a = t("a", "p,d\nx,2018-01-01\ny,2018-06-30\nz,2018-03-01\n");
        assert_eq!(
            temporal_extent(&a),
            Some((
                parse_timestamp("2018-01-01").unwrap(),
                parse_timestamp("2018-06-30").unwrap()
            ))
        );
        assert_eq!(temporal_extent(&t("b", "p,q\nx,1\n")), None);
        let two = t("c", "p,d,e\nx,2018-01-01,2019-05-05\ny,2017-06-30,2018-01-01\n");
        assert_eq!(
            temporal_extent(&two),
            Some((
                parse_timestamp("2017-06-30").unwrap(),
                parse_timestamp("2019-05-05").unwrap()
            ))
        );
    }

    #[test]
    fn subsumption() {
        let a = t("a", "p,q\nx,1\ny,2\n");
        let b = t("b", "q,p\n1,x\n2,y\n3,z\n");
        assert_eq!(subsumption_relation(&a, &b), Subsumption::AInB);
        assert_eq!(subsumption_relation(&b, &a), Subsumption::BInA);
        assert_eq!(subsumption_relation(&a, &a), Subsumption::Equal);
        let dup = t("d", "p,q\nx,1\nx,1\n");
        assert_eq!(subsumption_relation(&dup, &a), Subsumption::None);
        let c = t("c", "p,r\nx,1\ny,2\n");
        assert_eq!(subsumption_relation(&a, &c), Subsumption::None);
    }

    #[test]
    fn drift_verdicts() {
        let a = t("a", "player,age\nA,30\nB,25\nC,20\n");
        let b = t("b", "player,age\nA,31\nB,26\nD,22\n");
        let edges = drift_order(&[&a, &b], "age").unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].older, edges[0].newer), (0, 1));
        let edges = drift_order(&[&b, &a], "age").unwrap();
        assert_eq!((edges[0].older, edges[0].newer), (1, 0));
        assert!(drift_order(&[&a, &a], "age").unwrap().is_empty());
        assert!(matches!(
            drift_order(&[&a], "player"),
            Err(LineageError::SignalUnavailable(_))
        ));
    }

    #[test]
    fn temporal_beats_everything() {
        let v0 = t("z0", "p,d,n\nA,2018-01-01,5\nB,2018-01-02,6\n");
        let v1 = t("a1", "p,d,n\nA,2018-01-01,4\nB,2018-02-02,3\n");
        let v2 = t("m2", "p,d,n\nA,2018-03-01,1\nB,2018-02-02,1\nC,2018-01-01,1\n");
        let lin = infer_lineage("f", &[&v2, &v0, &v1]);
        assert_eq!(lin.order, ["z0", "a1", "m2"]);
        assert!(lin
            .evidence
            .iter()
            .all(|e| e.signal == Signal::Temporal && e.confidence == 1.0));
    }

    #[test]
    fn singleton_and_tiebreak() {
        let a = t("b", "p\nx\n");
        let lin = infer_lineage("f", &[&a]);
        assert_eq!(lin.order, ["b"]);
        assert!(lin.evidence.is_empty());
        let x = t("y", "p,q\nx,a\n");
        let y = t("x", "p,q\nx,b\n");
        let lin = infer_lineage("f", &[&x, &y]);
        assert_eq!(lin.order, ["x", "y"]);
        assert_eq!(lin.evidence[0].signal, Signal::Tiebreak);
    }

    #[test]
    fn drift_vote_ignores_single_edits() {
        // rating loses one point for one player; age grows for all.
        let a = t("p", "player,age,rating\nA,20,50\nB,21,60\nC,22,70\nD,23,80\n");
        let b = t("q", "player,age,rating\nA,21,50\nB,22,60\nC,23,70\nD,24,79\nE,19,1\n");
        let lin = infer_lineage("f", &[&b, &a]);
        assert_eq!(lin.order, ["p", "q"]);
        assert_eq!(lin.evidence[0].signal, Signal::Drift);
    }

    #[test]
    fn tau() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(kendall_tau(&s(&["a", "b", "c"]), &s(&["a", "b", "c"])), 1.0);
        assert_eq!(kendall_tau(&s(&["c", "b", "a"]), &s(&["a", "b", "c"])), -1.0);
        assert_eq!(kendall_tau(&s(&["a"]), &s(&["a"])), 1.0);
    }
}
