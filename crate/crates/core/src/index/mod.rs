// SPDX-License-Identifier: Apache-2.0

//! Three-level temporal index: representative postings, version chains and
//! an ordered change-log store, plus the anchor store and time travel.

mod cache;
mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::change::{apply_log, invert_log, ChangeError, ChangeLog, ChangeOp, KeyColumns};
use crate::family::{RepresentativeTable, VersionFamily};
use crate::lineage::{temporal_extent, Lineage};
use crate::table::{header_tokens, normalize_header, CellValue, Table, TableError};

pub use self::cache::{CacheCounters, VersionCache, DEFAULT_CACHE_CAPACITY};
pub use self::store::{StorageStats, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("inconsistent index input: {0}")]
    Build(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("ordinal {ordinal} out of range for family {family} ({len} versions)")]
    Range { family: String, ordinal: u32, len: usize },
    #[error("empty probe")]
    EmptyProbe,
    #[error("index corruption: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Change(#[from] ChangeError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Which versions are materialized in full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorPolicy {
    #[default]
    Latest,
    Earliest,
    All,
    /// Ordinals divisible by `n`, plus the latest.
    EveryNth(u32),
}

impl AnchorPolicy {
    pub fn is_anchor(self, ordinal: u32, len: usize) -> bool {
        let last = len.saturating_sub(1) as u32;
        match self {
            AnchorPolicy::Latest => ordinal == last,
            AnchorPolicy::Earliest => ordinal == 0,
            AnchorPolicy::All => true,
            AnchorPolicy::EveryNth(n) => ordinal == last || ordinal.is_multiple_of(n.max(1)),
        }
    }
}

impl fmt::Display for AnchorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnchorPolicy::Latest => f.write_str("latest"),
            AnchorPolicy::Earliest => f.write_str("earliest"),
            AnchorPolicy::All => f.write_str("all"),
            AnchorPolicy::EveryNth(n) => write!(f, "every:{n}"),
        }
    }
}

impl FromStr for AnchorPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<AnchorPolicy, String> {
        match s {
            "latest" => Ok(AnchorPolicy::Latest),
            "earliest" => Ok(AnchorPolicy::Earliest),
            "all" => Ok(AnchorPolicy::All),
            _ => s
                .strip_prefix("every:")
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|n| *n >= 1)
                .map(AnchorPolicy::EveryNth)
                .ok_or_else(|| format!("unknown anchor policy `{s}` (latest, earliest, all, every:N)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionDescriptor {
    pub table_id: String,
    pub ordinal: u32,
    pub anchor: bool,
    /// Latest timestamp in the version, if it has a temporal column.
    pub temporal_max: Option<i64>,
}

/// A leaf of the change-log level. Each log is a `Begin`, its ops in order,
/// then an `End` marker.
#[derive(Debug, Clone, PartialEq)]
pub enum LogLeaf {
    Begin { to_ordinal: u32, key: Option<KeyColumns> },
    Op(ChangeOp),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LookupMode {
    Join,
    Union,
    Keyword,
}

impl fmt::Display for LookupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LookupMode::Join => "join",
            LookupMode::Union => "union",
            LookupMode::Keyword => "keyword",
        })
    }
}

impl FromStr for LookupMode {
    type Err = String;

    fn from_str(s: &str) -> Result<LookupMode, String> {
        match s.to_ascii_lowercase().as_str() {
            "join" => Ok(LookupMode::Join),
            "union" => Ok(LookupMode::Union),
            "keyword" => Ok(LookupMode::Keyword),
            _ => Err(format!("unknown mode `{s}` (join, union, keyword)")),
        }
    }
}

/// The dataset half of a query.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    /// Values of the query's key column.
    Join(Vec<CellValue>),
    /// Header names.
    Union(Vec<String>),
    Keyword(Vec<String>),
}

impl Probe {
    pub fn mode(&self) -> LookupMode {
        match self {
            Probe::Join(_) => LookupMode::Join,
            Probe::Union(_) => LookupMode::Union,
            Probe::Keyword(_) => LookupMode::Keyword,
        }
    }
}

/// Lowercase alphanumeric tokens of free text.
pub fn text_tokens(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Distinct, normalized probe elements in a canonical form shared by the
/// index and any exhaustive scorer.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizedProbe {
    Join(BTreeSet<CellValue>),
    Union(BTreeSet<String>),
    Keyword(BTreeSet<String>),
}

impl NormalizedProbe {
    pub fn new(probe: &Probe) -> Result<NormalizedProbe, IndexError> {
        let out = match probe {
            Probe::Join(v) => NormalizedProbe::Join(v.iter().filter(|c| !c.is_null()).cloned().collect()),
            Probe::Union(h) => NormalizedProbe::Union(
                h.iter()
                    .map(|x| normalize_header(x))
                    .filter(|x| !x.is_empty())
                    .collect(),
            ),
            Probe::Keyword(k) => NormalizedProbe::Keyword(k.iter().flat_map(|x| text_tokens(x)).collect()),
        };
        if out.is_empty() {
            return Err(IndexError::EmptyProbe);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        match self {
            NormalizedProbe::Join(s) => s.len(),
            NormalizedProbe::Union(s) | NormalizedProbe::Keyword(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Discovery postings over representative tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Level1 {
    /// Normalized header name → families.
    pub headers: BTreeMap<String, BTreeSet<String>>,
    /// Header token → families.
    pub header_tokens: BTreeMap<String, BTreeSet<String>>,
    /// Distinct cell value → (family, column) postings.
    pub values: BTreeMap<CellValue, Vec<(String, String)>>,
    /// Header tokens and lowercase value tokens → families.
    pub keywords: BTreeMap<String, BTreeSet<String>>,
}

impl Level1 {
    fn add(&mut self, rep: &RepresentativeTable) {
        let fam = &rep.family_id;
        let t = &rep.table;
        for (j, h) in t.headers().iter().enumerate() {
            self.headers.entry(h.clone()).or_default().insert(fam.clone());
            for tok in header_tokens(h) {
                self.header_tokens
                    .entry(tok.to_string())
                    .or_default()
                    .insert(fam.clone());
                self.keywords.entry(tok.to_lowercase()).or_default().insert(fam.clone());
            }
            let distinct: BTreeSet<&CellValue> = t.column(j).filter(|c| !c.is_null()).collect();
            for v in distinct {
                self.values.entry(v.clone()).or_default().push((fam.clone(), h.clone()));
                for tok in text_tokens(&v.render()) {
                    self.keywords.entry(tok).or_default().insert(fam.clone());
                }
            }
        }
    }
}

enum AnchorStore {
    Memory(BTreeMap<(String, u32), Table>),
    Disk(PathBuf),
}

/// Read-only after construction; share it freely between threads.
pub struct TemporalIndex {
    pub level1: Level1,
    chains: BTreeMap<String, Vec<VersionDescriptor>>,
    level3: BTreeMap<(String, u32, u32), LogLeaf>,
    representatives: BTreeMap<String, RepresentativeTable>,
    lineages: BTreeMap<String, Lineage>,
    anchors: AnchorStore,
    policy: AnchorPolicy,
}

/// Family ids become path components, so they are restricted.
fn check_family_id(id: &str) -> Result<(), IndexError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(IndexError::Build(format!(
            "family id `{id}` is not a safe path component"
        )))
    }
}

pub fn build_index(
    tables: &[Table],
    families: &[VersionFamily],
    lineages: &[Lineage],
    logs: &[ChangeLog],
    representatives: &[RepresentativeTable],
    policy: AnchorPolicy,
) -> Result<TemporalIndex, IndexError> {
    let by_id: HashMap<&str, &Table> = tables.iter().map(|t| (t.table_id.as_str(), t)).collect();
    let lineage_of: HashMap<&str, &Lineage> = lineages.iter().map(|l| (l.family_id.as_str(), l)).collect();
    let rep_of: HashMap<&str, &RepresentativeTable> =
        representatives.iter().map(|r| (r.family_id.as_str(), r)).collect();
    let mut log_of: HashMap<(&str, u32), &ChangeLog> = HashMap::new();
    for log in logs {
        if !log.is_forward() {
            return Err(IndexError::Build(format!(
                "log {} -> {} of family {} is not a forward step",
                log.from_ordinal, log.to_ordinal, log.family_id
            )));
        }
        log.validate()?;
        if log_of.insert((log.family_id.as_str(), log.from_ordinal), log).is_some() {
            return Err(IndexError::Build(format!(
                "duplicate log for family {} from ordinal {}",
                log.family_id, log.from_ordinal
            )));
        }
    }

    let mut index = TemporalIndex {
        level1: Level1::default(),
        chains: BTreeMap::new(),
        level3: BTreeMap::new(),
        representatives: BTreeMap::new(),
        lineages: BTreeMap::new(),
        anchors: AnchorStore::Memory(BTreeMap::new()),
        policy,
    };
    let mut anchors = BTreeMap::new();
    let mut used_logs = 0;
    for fam in families {
        let fid = fam.family_id.as_str();
        check_family_id(fid)?;
        let lineage = lineage_of
            .get(fid)
            .ok_or_else(|| IndexError::Build(format!("family {fid} has no lineage")))?;
        let order: BTreeSet<&String> = lineage.order.iter().collect();
        if order.len() != lineage.order.len() || order != fam.member_table_ids.iter().collect() {
            return Err(IndexError::Build(format!(
                "lineage of {fid} does not cover its members"
            )));
        }
        let rep = rep_of
            .get(fid)
            .ok_or_else(|| IndexError::Build(format!("family {fid} has no representative table")))?;
        let n = lineage.order.len();
        let mut chain = Vec::with_capacity(n);
        for (k, tid) in lineage.order.iter().enumerate() {
            let t = by_id
                .get(tid.as_str())
                .ok_or_else(|| IndexError::Build(format!("table {tid} of family {fid} is missing")))?;
            let ordinal = k as u32;
            let anchor = policy.is_anchor(ordinal, n);
            if anchor {
                anchors.insert((fid.to_string(), ordinal), (*t).clone());
            }
            chain.push(VersionDescriptor {
                table_id: tid.clone(),
                ordinal,
                anchor,
                temporal_max: temporal_extent(t).map(|e| e.1),
            });
        }
        for k in 0..n.saturating_sub(1) as u32 {
            let log = log_of.get(&(fid, k)).ok_or_else(|| {
                IndexError::Build(format!(
                    "missing log for family {fid} between ordinals {k} and {}",
                    k + 1
                ))
            })?;
            index.insert_log(log);
            used_logs += 1;
        }
        index.level1.add(rep);
        index.chains.insert(fid.to_string(), chain);
        index.representatives.insert(fid.to_string(), (*rep).clone());
        index.lineages.insert(fid.to_string(), (*lineage).clone());
    }
    if used_logs != log_of.len() {
        return Err(IndexError::Build(format!(
            "{} logs do not belong to any adjacent version pair",
            log_of.len() - used_logs
        )));
    }
    index.anchors = AnchorStore::Memory(anchors);
    Ok(index)
}

impl TemporalIndex {
    fn insert_log(&mut self, log: &ChangeLog) {
        let fid = log.family_id.clone();
        let from = log.from_ordinal;
        self.level3.insert(
            (fid.clone(), from, 0),
            LogLeaf::Begin {
                to_ordinal: log.to_ordinal,
                key: log.key.clone(),
            },
        );
        for (i, op) in log.ops.iter().enumerate() {
            self.level3
                .insert((fid.clone(), from, i as u32 + 1), LogLeaf::Op(op.clone()));
        }
        self.level3.insert((fid, from, log.ops.len() as u32 + 1), LogLeaf::End);
    }

    pub fn policy(&self) -> AnchorPolicy {
        self.policy
    }

    pub fn family_ids(&self) -> impl Iterator<Item = &str> {
        self.chains.keys().map(String::as_str)
    }

    pub fn chain(&self, family_id: &str) -> Result<&[VersionDescriptor], IndexError> {
        self.chains
            .get(family_id)
            .map(Vec::as_slice)
            .ok_or_else(|| IndexError::NotFound(format!("family {family_id}")))
    }

    pub fn representative(&self, family_id: &str) -> Result<&RepresentativeTable, IndexError> {
        self.representatives
            .get(family_id)
            .ok_or_else(|| IndexError::NotFound(format!("family {family_id}")))
    }

    pub fn representatives(&self) -> impl Iterator<Item = &RepresentativeTable> {
        self.representatives.values()
    }

    pub fn lineage(&self, family_id: &str) -> Result<&Lineage, IndexError> {
        self.lineages
            .get(family_id)
            .ok_or_else(|| IndexError::NotFound(format!("family {family_id}")))
    }

    /// Number of stored logs.
    pub fn log_count(&self) -> usize {
        self.level3
            .values()
            .filter(|l| matches!(l, LogLeaf::Begin { .. }))
            .count()
    }

    /// Walks the leaves of one log from its start to its end marker.
    pub fn log(&self, family_id: &str, from_ordinal: u32) -> Result<ChangeLog, IndexError> {
        let start = (family_id.to_string(), from_ordinal, 0);
        let end = (family_id.to_string(), from_ordinal, u32::MAX);
        let mut leaves = self.level3.range(start..=end).map(|(_, l)| l);
        let missing = || IndexError::Corrupt(format!("no log for family {family_id} from ordinal {from_ordinal}"));
        let (to_ordinal, key) = match leaves.next() {
            Some(LogLeaf::Begin { to_ordinal, key }) => (*to_ordinal, key.clone()),
            Some(_) => {
                return Err(IndexError::Corrupt(format!(
                    "log {family_id}/{from_ordinal} has no start"
                )))
            }
            None => return Err(missing()),
        };
        let mut ops = Vec::new();
        for leaf in leaves {
            match leaf {
                LogLeaf::Op(op) => ops.push(op.clone()),
                LogLeaf::End => {
                    return Ok(ChangeLog {
                        family_id: family_id.to_string(),
                        from_ordinal,
                        to_ordinal,
                        key,
                        ops,
                    })
                }
                LogLeaf::Begin { .. } => break,
            }
        }
        Err(IndexError::Corrupt(format!(
            "log {family_id}/{from_ordinal} has no end marker"
        )))
    }

    pub(crate) fn descriptor(&self, family_id: &str, ordinal: u32) -> Result<&VersionDescriptor, IndexError> {
        let chain = self.chain(family_id)?;
        chain.get(ordinal as usize).ok_or_else(|| IndexError::Range {
            family: family_id.to_string(),
            ordinal,
            len: chain.len(),
        })
    }

    /// Reconstructs version `to` from `start`, the version at `from`.
    pub fn travel(&self, family_id: &str, from: u32, to: u32, start: Table) -> Result<Table, IndexError> {
        self.descriptor(family_id, from)?;
        let target = self.descriptor(family_id, to)?.table_id.clone();
        let mut t = start;
        if to > from {
            for k in from..to {
                t = apply_log(&t, &self.log(family_id, k)?)?;
            }
        } else {
            for k in (to..from).rev() {
                t = apply_log(&t, &invert_log(&self.log(family_id, k)?))?;
            }
        }
        Ok(t.with_id(target))
    }

    /// Reads an anchor from the cold store, bypassing any cache.
    pub fn read_anchor(&self, family_id: &str, ordinal: u32) -> Result<Table, IndexError> {
        let d = self.descriptor(family_id, ordinal)?;
        if !d.anchor {
            return Err(IndexError::NotFound(format!("anchor {family_id}/{ordinal}")));
        }
        match &self.anchors {
            AnchorStore::Memory(m) => m
                .get(&(family_id.to_string(), ordinal))
                .cloned()
                .ok_or_else(|| IndexError::Corrupt(format!("anchor {family_id}/{ordinal} is missing"))),
            AnchorStore::Disk(root) => store::read_anchor(root, family_id, ordinal, &d.table_id),
        }
    }

    /// Ranked `(family_id, score)` pairs with positive score. Ties go to the
    /// smaller family id.
    pub fn lookup(&self, probe: &Probe) -> Result<Vec<(String, f64)>, IndexError> {
        let p = NormalizedProbe::new(probe)?;
        let n = p.len() as f64;
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        match &p {
            NormalizedProbe::Join(values) => {
                let mut hits: HashMap<(&str, &str), usize> = HashMap::new();
                for v in values {
                    for (f, c) in self.level1.values.get(v).into_iter().flatten() {
                        *hits.entry((f.as_str(), c.as_str())).or_default() += 1;
                    }
                }
                for ((f, _), h) in hits {
                    let s = h as f64 / n;
                    let e = scores.entry(f).or_insert(0.0);
                    *e = e.max(s);
                }
            }
            NormalizedProbe::Union(headers) => {
                let mut inter: BTreeMap<&str, usize> = BTreeMap::new();
                for h in headers {
                    for f in self.level1.headers.get(h).into_iter().flatten() {
                        *inter.entry(f.as_str()).or_default() += 1;
                    }
                }
                for (f, i) in inter {
                    let r = self.representatives[f].table.arity();
                    scores.insert(f, i as f64 / (headers.len() + r - i) as f64);
                }
            }
            NormalizedProbe::Keyword(tokens) => {
                let mut hits: BTreeMap<&str, usize> = BTreeMap::new();
                for tok in tokens {
                    for f in self.level1.keywords.get(tok).into_iter().flatten() {
                        *hits.entry(f.as_str()).or_default() += 1;
                    }
                }
                for (f, h) in hits {
                    scores.insert(f, h as f64 / n);
                }
            }
        }
        let mut ranked: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(f, s)| (f.to_string(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(ranked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{build_representative, family_id_for};

    fn t(id: &str, src: &str) -> Table {
        Table::from_csv(id, src.as_bytes()).unwrap()
    }

    fn singleton(table: &Table) -> (VersionFamily, Lineage, RepresentativeTable) {
        let fid = family_id_for([table.table_id.as_str()]);
        let fam = VersionFamily {
            family_id: fid.clone(),
            member_table_ids: [table.table_id.clone()].into(),
            pair_scores: BTreeMap::new(),
        };
        let lin = Lineage {
            family_id: fid.clone(),
            order: vec![table.table_id.clone()],
            evidence: vec![],
        };
        (fam, lin, build_representative(&fid, &[table]).unwrap())
    }

    fn singleton_index(tables: &[Table]) -> TemporalIndex {
        let parts: Vec<_> = tables.iter().map(singleton).collect();
        let fams: Vec<_> = parts.iter().map(|p| p.0.clone()).collect();
        let lins: Vec<_> = parts.iter().map(|p| p.1.clone()).collect();
        let reps: Vec<_> = parts.iter().map(|p| p.2.clone()).collect();
        build_index(tables, &fams, &lins, &[], &reps, AnchorPolicy::Latest).unwrap()
    }

    #[test]
    fn singleton_families() {
        let tables = vec![
            t("a", "player,pts\nx,1\ny,2\n"),
            t("b", "city,pop\nOslo,5\n"),
            t("c", "k\nq\n"),
        ];
        let idx = singleton_index(&tables);
        assert_eq!(idx.family_ids().count(), 3);
        for f in idx.family_ids() {
            let chain = idx.chain(f).unwrap();
            assert_eq!(chain.len(), 1);
            assert!(chain[0].anchor);
        }
        assert_eq!(idx.log_count(), 0);
    }

    #[test]
    fn join_on_exact_key_scores_one() {
        let tables = vec![t("a", "player,pts\nx,1\ny,2\n"), t("b", "player,goals\nx,1\nz,3\n")];
        let idx = singleton_index(&tables);
        let probe = Probe::Join(vec![CellValue::Text("x".into()), CellValue::Text("y".into())]);
        let ranked = idx.lookup(&probe).unwrap();
        assert_eq!(ranked[0], (family_id_for(["a"]), 1.0));
        assert_eq!(ranked[1], (family_id_for(["b"]), 0.5));
        assert!(matches!(
            idx.lookup(&Probe::Keyword(vec![" ".into()])),
            Err(IndexError::EmptyProbe)
        ));
    }

    #[test]
    fn union_and_keyword_scores() {
        let tables = vec![t("a", "player,team,pts\nLeBron James,LAL,1\n")];
        let idx = singleton_index(&tables);
        let u = idx.lookup(&Probe::Union(vec!["Player".into(), "Age".into()])).unwrap();
        assert_eq!(u[0].1, 0.25);
        let k = idx
            .lookup(&Probe::Keyword(vec!["lebron".into(), "PTS".into(), "hockey".into()]))
            .unwrap();
        assert!((k[0].1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missing_log_names_gap() {
        let a = t("a", "k,v\nx,1\n");
        let b = t("b", "k,v\nx,2\n");
        let fid = family_id_for(["a", "b"]);
        let fam = VersionFamily {
            family_id: fid.clone(),
            member_table_ids: ["a".to_string(), "b".to_string()].into(),
            pair_scores: BTreeMap::new(),
        };
        let lin = Lineage {
            family_id: fid.clone(),
            order: vec!["a".into(), "b".into()],
            evidence: vec![],
        };
        let rep = build_representative(&fid, &[&a, &b]).unwrap();
        let err = build_index(&[a, b], &[fam], &[lin], &[], &[rep], AnchorPolicy::Latest)
            .err()
            .unwrap();
        assert!(err.to_string().contains("between ordinals 0 and 1"), "{err}");
    }

    #[test]
    fn anchor_policies() {
        assert!(AnchorPolicy::Latest.is_anchor(3, 4));
        assert!(!AnchorPolicy::Latest.is_anchor(0, 4));
        assert!(AnchorPolicy::EveryNth(2).is_anchor(2, 5));
        assert!(!AnchorPolicy::EveryNth(2).is_anchor(3, 5));
        assert!(AnchorPolicy::EveryNth(2).is_anchor(4, 5));
        for p in ["latest", "earliest", "all", "every:3"] {
            assert_eq!(p.parse::<AnchorPolicy>().unwrap().to_string(), p);
        }
        assert!("every:0".parse::<AnchorPolicy>().is_err());
    }
}
