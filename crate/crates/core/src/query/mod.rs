// SPDX-License-Identifier: Apache-2.0

//! Online phase: query decoupling, version selection and answering.

mod file;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::index::{CacheCounters, IndexError, LookupMode, Probe, TemporalIndex, VersionCache};
use crate::table::{infer_entity_key, normalize_header, parse_timestamp, CellValue, Table, TableError};

pub use self::file::{parse_query, write_answer, QUERY_KEYS};

/// Minimum number of joined entities for rank agreement.
pub const MIN_IMPLICIT_OVERLAP: usize = 3;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("query is missing `{0}`")]
    MissingField(&'static str),
    #[error("query table has no column `{0}`")]
    UnknownColumn(String),
    #[error("ordinal {ordinal} out of range ({len} versions)")]
    Range { ordinal: u32, len: usize },
    #[error("unsupported clause: {0}")]
    Unsupported(String),
    #[error("insufficient overlap: best version joins {found} entities, need {MIN_IMPLICIT_OVERLAP}")]
    InsufficientOverlap { found: usize },
    #[error("no version satisfies the clause: {0}")]
    Unsatisfied(String),
    #[error("top_k must be at least 1")]
    TopK,
    #[error("query file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The version half of a query.
#[derive(Debug, Clone, PartialEq)]
pub enum VersionClause {
    Latest,
    Ordinal(u32),
    All,
    /// UTC seconds.
    AsOf(i64),
    ArgMax {
        entity: String,
        column: String,
    },
    ArgMin {
        entity: String,
        column: String,
    },
    Implicit,
}

impl fmt::Display for VersionClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionClause::Latest => f.write_str("latest"),
            VersionClause::Ordinal(k) => write!(f, "ordinal:{k}"),
            VersionClause::All => f.write_str("all"),
            VersionClause::AsOf(ts) => write!(f, "asof:{}", CellValue::Timestamp(*ts).render()),
            VersionClause::ArgMax { entity, column } => write!(f, "argmax:{entity}:{column}"),
            VersionClause::ArgMin { entity, column } => write!(f, "argmin:{entity}:{column}"),
            VersionClause::Implicit => f.write_str("implicit"),
        }
    }
}

impl FromStr for VersionClause {
    type Err = String;

    fn from_str(s: &str) -> Result<VersionClause, String> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let arg = |what: &str| {
            let (entity, column) = rest
                .rsplit_once(':')
                .filter(|(e, c)| !e.trim().is_empty() && !c.trim().is_empty())
                .ok_or_else(|| format!("`{what}` needs <entity>:<column>"))?;
            Ok::<_, String>((entity.trim().to_string(), normalize_header(column)))
        };
        match head.to_ascii_lowercase().as_str() {
            "latest" if rest.is_empty() => Ok(VersionClause::Latest),
            "all" if rest.is_empty() => Ok(VersionClause::All),
            "implicit" if rest.is_empty() => Ok(VersionClause::Implicit),
            "ordinal" => rest
                .trim()
                .parse()
                .map(VersionClause::Ordinal)
                .map_err(|_| format!("bad ordinal `{rest}`")),
            "asof" => parse_timestamp(rest.trim())
                .map(VersionClause::AsOf)
                .ok_or_else(|| format!("bad timestamp `{rest}`")),
            "argmax" => arg("argmax").map(|(entity, column)| VersionClause::ArgMax { entity, column }),
            "argmin" => arg("argmin").map(|(entity, column)| VersionClause::ArgMin { entity, column }),
            _ => Err(format!(
                "unknown version clause `{s}` (latest, ordinal:k, all, asof:date, argmax:e:c, argmin:e:c, implicit)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryQuery {
    pub mode: LookupMode,
    pub query_table: Option<Table>,
    pub key_column: Option<String>,
    pub target_column: Option<String>,
    pub keywords: Option<Vec<String>>,
    pub version: VersionClause,
}

/// Selects a version within one family.
#[derive(Debug, Clone, PartialEq)]
pub enum VersionSelector {
    Explicit(VersionClause),
    /// Rank agreement between the query's target column and each version,
    /// joined on the key column.
    RankAgreement {
        table: Table,
        key: usize,
        target: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoupled {
    pub probe: Probe,
    pub selector: VersionSelector,
}

fn resolve(t: &Table, name: &Option<String>, field: &'static str) -> Result<usize, QueryError> {
    let name = name.as_ref().ok_or(QueryError::MissingField(field))?;
    let n = normalize_header(name);
    t.column_index(&n).ok_or(QueryError::UnknownColumn(n))
}

pub fn decouple(q: &DiscoveryQuery) -> Result<Decoupled, QueryError> {
    let table = || q.query_table.as_ref().ok_or(QueryError::MissingField("table"));
    let probe = match q.mode {
        LookupMode::Join => {
            let t = table()?;
            let k = resolve(t, &q.key_column, "key")?;
            Probe::Join(t.column(k).cloned().collect())
        }
        LookupMode::Union => Probe::Union(table()?.headers().to_vec()),
        LookupMode::Keyword => Probe::Keyword(q.keywords.clone().ok_or(QueryError::MissingField("keywords"))?),
    };
    let selector = match &q.version {
        VersionClause::Implicit => {
            let t = table()?;
            let key = resolve(t, &q.key_column, "key")?;
            let target = resolve(t, &q.target_column, "target")?;
            VersionSelector::RankAgreement {
                table: t.clone(),
                key,
                target,
            }
        }
        clause => VersionSelector::Explicit(clause.clone()),
    };
    Ok(Decoupled { probe, selector })
}

/// Why a version was chosen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VersionEvidence {
    pub clause: String,
    /// Best |Spearman| for rank agreement, the extreme value for
    /// argmax/argmin, the timestamp for asof.
    pub statistic: Option<f64>,
    pub column: Option<String>,
}

impl VersionEvidence {
    fn plain(clause: &VersionClause) -> VersionEvidence {
        VersionEvidence {
            clause: clause.to_string(),
            statistic: None,
            column: None,
        }
    }
}

/// Average ranks (1-based), ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either side is constant or there
/// are fewer than two points.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Column of `version` to join or look entities up on: the named column if
/// present, else the inferred entity key.
fn entity_column(version: &Table, preferred: Option<&str>) -> Option<usize> {
    preferred
        .and_then(|p| version.column_index(p))
        .or_else(|| infer_entity_key(version).map(|k| k.column_index))
}

/// Best |Spearman| of the target against any numeric column of `version`.
/// Returns the joined entity count alongside.
fn rank_agreement(query: &Table, key: usize, target: usize, version: &Table) -> (usize, Option<(f64, String)>) {
    let Some(vk) = entity_column(version, Some(&query.headers()[key])) else {
        return (0, None);
    };
    let mut rows: HashMap<String, usize> = HashMap::new();
    for (i, r) in version.rows().iter().enumerate() {
        if !r[vk].is_null() {
            rows.entry(r[vk].render()).or_insert(i);
        }
    }
    let joined: Vec<(f64, usize)> = query
        .rows()
        .iter()
        .filter_map(|r| {
            let t = r[target].as_f64()?;
            rows.get(&r[key].render()).map(|&i| (t, i))
        })
        .collect();
    let mut best: Option<(f64, String)> = None;
    for j in (0..version.arity()).filter(|&j| j != vk && version.col_types()[j].is_numeric()) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = joined
            .iter()
            .filter_map(|&(t, i)| version.rows()[i][j].as_f64().map(|v| (t, v)))
            .unzip();
        if xs.len() < MIN_IMPLICIT_OVERLAP {
            continue;
        }
        if let Some(rho) = spearman(&xs, &ys) {
            if best.as_ref().is_none_or(|b| rho.abs() > b.0) {
                best = Some((rho.abs(), version.headers()[j].clone()));
            }
        }
    }
    (joined.len(), best)
}

/// Value of `column` at the row whose entity renders as `entity`.
fn entity_value(version: &Table, entity: &str, column: &str) -> Option<f64> {
    let j = version.column_index(column)?;
    let k = entity_column(version, None)?;
    version
        .rows()
        .iter()
        .find(|r| r[k].render() == entity)
        .and_then(|r| r[j].as_f64())
}

/// Picks one ordinal of `family_id`. `All` is resolved by [`Engine::answer`].
pub fn select_version(
    index: &TemporalIndex,
    cache: &VersionCache,
    family_id: &str,
    selector: &VersionSelector,
) -> Result<(u32, VersionEvidence), QueryError> {
    let chain = index.chain(family_id)?;
    let len = chain.len();
    let last = len as u32 - 1;
    let clause = match selector {
        VersionSelector::Explicit(c) => c,
        VersionSelector::RankAgreement { table, key, target } => {
            if !table.col_types()[*target].is_numeric() {
                return Err(QueryError::Unsupported(format!(
                    "implicit selection needs a numeric target, `{}` is {}",
                    table.headers()[*target],
                    table.col_types()[*target]
                )));
            }
            let mut best: Option<(u32, f64, String)> = None;
            let mut max_joined = 0;
            for d in chain {
                let v = index.fetch_version(cache, family_id, d.ordinal)?;
                let (joined, agreement) = rank_agreement(table, *key, *target, &v);
                max_joined = max_joined.max(joined);
                if let Some((score, col)) = agreement {
                    // Ascending ordinals with >= resolve ties to the latest.
                    if best.as_ref().is_none_or(|b| score >= b.1) {
                        best = Some((d.ordinal, score, col));
                    }
                }
            }
            return match best {
                Some((ordinal, score, column)) => Ok((
                    ordinal,
                    VersionEvidence {
                        clause: VersionClause::Implicit.to_string(),
                        statistic: Some(score),
                        column: Some(column),
                    },
                )),
                None if max_joined < MIN_IMPLICIT_OVERLAP => Err(QueryError::InsufficientOverlap { found: max_joined }),
                None => Err(QueryError::Unsatisfied(
                    "no numeric column varies with the target".into(),
                )),
            };
        }
    };
    match clause {
        VersionClause::Latest => Ok((last, VersionEvidence::plain(clause))),
        VersionClause::Ordinal(k) if (*k as usize) < len => Ok((*k, VersionEvidence::plain(clause))),
        VersionClause::Ordinal(k) => Err(QueryError::Range { ordinal: *k, len }),
        VersionClause::All => Err(QueryError::Unsupported("`all` selects every version".into())),
        VersionClause::Implicit => Err(QueryError::Unsupported("implicit clause was not decoupled".into())),
        VersionClause::AsOf(ts) => {
            if chain.iter().all(|d| d.temporal_max.is_none()) {
                return Err(QueryError::Unsupported(format!(
                    "family {family_id} has no temporal column"
                )));
            }
            chain
                .iter()
                .rev()
                .find(|d| d.temporal_max.is_some_and(|m| m <= *ts))
                .map(|d| {
                    (
                        d.ordinal,
                        VersionEvidence {
                            clause: clause.to_string(),
                            statistic: d.temporal_max.map(|m| m as f64),
                            column: None,
                        },
                    )
                })
                .ok_or_else(|| QueryError::Unsatisfied(format!("no version of {family_id} predates {clause}")))
        }
        VersionClause::ArgMax { entity, column } | VersionClause::ArgMin { entity, column } => {
            let max = matches!(clause, VersionClause::ArgMax { .. });
            let mut best: Option<(u32, f64)> = None;
            for d in chain {
                let v = index.fetch_version(cache, family_id, d.ordinal)?;
                if let Some(x) = entity_value(&v, entity, column) {
                    let better = best.is_none_or(|(_, b)| if max { x >= b } else { x <= b });
                    if better {
                        best = Some((d.ordinal, x));
                    }
                }
            }
            best.map(|(ordinal, x)| {
                (
                    ordinal,
                    VersionEvidence {
                        clause: clause.to_string(),
                        statistic: Some(x),
                        column: Some(column.clone()),
                    },
                )
            })
            .ok_or_else(|| QueryError::Unsatisfied(format!("no version of {family_id} has `{entity}` with `{column}`")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub family_id: String,
    pub ordinal: u32,
    pub table_id: String,
    #[serde(skip)]
    pub table: Table,
    pub discovery_score: f64,
    pub evidence: VersionEvidence,
    /// Cache counters right after this result was fetched.
    pub counters: CacheCounters,
}

#[derive(Debug)]
pub struct FamilyFailure {
    pub family_id: String,
    pub error: QueryError,
}

#[derive(Debug, Default)]
pub struct Answer {
    pub results: Vec<QueryResult>,
    pub failures: Vec<FamilyFailure>,
}

/// Index plus the cache shared by every query against it.
pub struct Engine {
    pub index: TemporalIndex,
    pub cache: VersionCache,
}

impl Engine {
    pub fn new(index: TemporalIndex, cache_capacity: usize) -> Engine {
        Engine {
            index,
            cache: VersionCache::new(cache_capacity),
        }
    }

    fn family_results(
        &self,
        family_id: &str,
        score: f64,
        selector: &VersionSelector,
    ) -> Result<Vec<QueryResult>, QueryError> {
        let picks = match selector {
            VersionSelector::Explicit(VersionClause::All) => self
                .index
                .chain(family_id)?
                .iter()
                .map(|d| (d.ordinal, VersionEvidence::plain(&VersionClause::All)))
                .collect(),
            s => vec![select_version(&self.index, &self.cache, family_id, s)?],
        };
        let mut out = Vec::with_capacity(picks.len());
        for (ordinal, evidence) in picks {
            let table = self.index.fetch_version(&self.cache, family_id, ordinal)?;
            out.push(QueryResult {
                family_id: family_id.to_string(),
                ordinal,
                table_id: table.table_id.clone(),
                table,
                discovery_score: score,
                evidence,
                counters: self.cache.counters(),
            });
        }
        Ok(out)
    }

    /// Decouples, looks up the top `top_k` families and picks a version in
    /// each. A failing family is reported without dropping the others.
    pub fn answer(&self, q: &DiscoveryQuery, top_k: usize) -> Result<Answer, QueryError> {
        if top_k == 0 {
            return Err(QueryError::TopK);
        }
        let d = decouple(q)?;
        let ranked = self.index.lookup(&d.probe)?;
        let mut answer = Answer::default();
        for (family_id, score) in ranked.into_iter().take(top_k) {
            match self.family_results(&family_id, score, &d.selector) {
                Ok(r) => answer.results.extend(r),
                Err(error) => answer.failures.push(FamilyFailure { family_id, error }),
            }
        }
        Ok(answer)
    }
}
