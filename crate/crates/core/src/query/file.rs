// SPDX-License-Identifier: Apache-2.0

//! Query files and result output.
//!
//! A query file is `key = value` lines; `#` starts a comment. Keys: `mode`
//! (join, union, keyword), `table` (CSV path, relative to the query file),
//! `key`, `target`, `keywords` (comma-separated) and `version` (see
//! [`VersionClause`]). `version` defaults to `latest`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Answer, DiscoveryQuery, QueryError, VersionClause};
use crate::table::Table;

pub const QUERY_KEYS: [&str; 6] = ["mode", "table", "key", "target", "keywords", "version"];

/// Parses a query file. `base` is the directory `table` paths resolve
/// against.
pub fn parse_query(text: &str, base: &Path) -> Result<DiscoveryQuery, QueryError> {
    let mut mode = None;
    let mut table_path: Option<PathBuf> = None;
    let mut q = DiscoveryQuery {
        mode: crate::index::LookupMode::Join,
        query_table: None,
        key_column: None,
        target_column: None,
        keywords: None,
        version: VersionClause::Latest,
    };
    let mut seen = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| QueryError::Parse { line: i + 1, message };
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
        let (k, v) = (k.trim(), v.trim());
        if !QUERY_KEYS.contains(&k) {
            return Err(err(format!("unknown key `{k}`")));
        }
        if seen.contains(&k) {
            return Err(err(format!("duplicate key `{k}`")));
        }
        seen.push(k);
        if v.is_empty() {
            return Err(err(format!("`{k}` has no value")));
        }
        match k {
            "mode" => mode = Some(v.parse().map_err(err)?),
            "table" => table_path = Some(base.join(v)),
            "key" => q.key_column = Some(v.to_string()),
            "target" => q.target_column = Some(v.to_string()),
            "keywords" => {
                q.keywords = Some(
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect(),
                )
            }
            _ => q.version = v.parse().map_err(err)?,
        }
    }
    q.mode = mode.ok_or(QueryError::MissingField("mode"))?;
    if let Some(path) = table_path {
        let bytes = fs::read(&path).map_err(|source| QueryError::Io {
            path: path.clone(),
            source,
        })?;
        let id = path
            .file_stem()
            .map_or_else(|| "query".to_string(), |s| s.to_string_lossy().into_owned());
        q.query_table = Some(Table::from_csv(id, &bytes)?);
    }
    Ok(q)
}

fn meta_value(v: Option<impl ToString>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

/// Writes `<rank>_<family>_<ordinal>.csv` and a `.meta` sidecar per result,
/// plus `failures.tsv` when any family failed. Returns the CSV paths.
pub fn write_answer(answer: &Answer, dir: &Path) -> Result<Vec<PathBuf>, QueryError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| QueryError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (rank, r) in answer.results.iter().enumerate() {
        let stem = format!("{:03}_{}_{}", rank + 1, r.family_id, r.ordinal);
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, r.table.to_csv()).map_err(io(&csv))?;
        let c = &r.counters;
        let meta = format!(
            "family = {}\nordinal = {}\ntable_id = {}\ndiscovery_score = {:?}\nclause = {}\nstatistic = {}\n\
             column = {}\ncold_reads = {}\nlog_reads = {}\nhits = {}\nreconstructions = {}\n",
            r.family_id,
            r.ordinal,
            r.table_id,
            r.discovery_score,
            r.evidence.clause,
            meta_value(r.evidence.statistic.map(|s| format!("{s:?}"))),
            meta_value(r.evidence.column.as_ref()),
            c.cold_reads,
            c.log_reads,
            c.hits,
            c.reconstructions,
        );
        let meta_path = dir.join(format!("{stem}.meta"));
        fs::write(&meta_path, meta).map_err(io(&meta_path))?;
        written.push(csv);
    }
    if !answer.failures.is_empty() {
        let body: String = answer
            .failures
            .iter()
            .map(|f| format!("{}\t{}\n", f.family_id, f.error.to_string().replace(['\t', '\n'], " ")))
            .collect();
        let path = dir.join("failures.tsv");
        fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::LookupMode;

    #[test]
    fn parses_keyword_query() {
        let q = parse_query(
            "mode = keyword\nkeywords = nba, players  # trailing\nversion = ordinal:0\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(q.mode, LookupMode::Keyword);
        assert_eq!(q.keywords, Some(vec!["nba".into(), "players".into()]));
        assert_eq!(q.version, VersionClause::Ordinal(0));
    }

    #[test]
    fn rejects_bad_files() {
        let base = Path::new(".");
        for bad in [
            "keywords = a",
            "mode = join\nmode = union",
            "mode = sideways",
            "mode = join\ncolour = red",
            "mode = join\nversion = newest",
            "mode",
        ] {
            assert!(parse_query(bad, base).is_err(), "{bad}");
        }
        assert!(matches!(
            parse_query("mode = join\ntable = does-not-exist.csv", base),
            Err(QueryError::Io { .. })
        ));
    }
}
