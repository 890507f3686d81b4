// SPDX-License-Identifier: Apache-2.0

//! On-disk index layout.
//!
//! ```text
//! MANIFEST                        format_version, anchor_policy
//! level1/{headers,header_tokens,keywords}.postings   JSON lines [key, [family..]]
//! level1/values.postings          JSON lines [cell, [[family, column]..]]
//! representatives/<family>.{csv,types,provenance}
//! level2/chains.manifest          family \t ordinal \t table_id \t anchor \t temporal_max
//! level2/lineage.manifest         family \t SIGNAL:confidence,..
//! level3/<family>.log             logs in wire format, each followed by `%end`
//! level3/<family>.offsets         from_ordinal \t byte_offset \t byte_len
//! anchors/<family>/<ordinal>.{csv,types}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    AnchorPolicy, AnchorStore, CacheCounters, IndexError, Level1, TemporalIndex, VersionCache, VersionDescriptor,
};
use crate::change::{parse_log, write_log};
use crate::family::RepresentativeTable;
use crate::lineage::{Evidence, Lineage};
use crate::table::{CellValue, ColType, Table};

pub const FORMAT_VERSION: u32 = 1;
const END_MARKER: &str = "%end\n";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), IndexError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String, IndexError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn corrupt(path: &Path, line: usize, what: impl std::fmt::Display) -> IndexError {
    IndexError::Corrupt(format!("{}:{line}: {what}", path.display()))
}

fn types_line(t: &Table) -> String {
    let names: Vec<String> = t.col_types().iter().map(ColType::to_string).collect();
    names.join(",") + "\n"
}

fn parse_types(text: &str) -> Result<Vec<ColType>, String> {
    let line = text.trim_end_matches('\n');
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(',').map(|s| s.parse().map_err(|e| format!("{e}"))).collect()
}

fn read_typed_table(csv: &Path, types: &Path, table_id: &str) -> Result<Table, IndexError> {
    let col_types = parse_types(&read(types)?).map_err(|e| corrupt(types, 1, e))?;
    let bytes = fs::read(csv).map_err(io_err(csv))?;
    Table::from_csv_typed(table_id, &bytes, &col_types).map_err(|e| corrupt(csv, 1, e))
}

/// Bytes of a table in the anchor layout (CSV plus type line).
fn table_bytes(t: &Table) -> u64 {
    (t.to_csv().len() + types_line(t).len()) as u64
}

fn log_block(log: &crate::change::ChangeLog) -> String {
    write_log(log) + END_MARKER
}

pub(super) fn read_anchor(root: &Path, family_id: &str, ordinal: u32, table_id: &str) -> Result<Table, IndexError> {
    let dir = root.join(family_id);
    read_typed_table(
        &dir.join(format!("{ordinal}.csv")),
        &dir.join(format!("{ordinal}.types")),
        table_id,
    )
}

fn postings_lines<K: Serialize, V: Serialize>(map: &BTreeMap<K, V>) -> String {
    let mut out = String::new();
    for entry in map {
        out.push_str(&serde_json::to_string(&entry).expect("postings serialize"));
        out.push('\n');
    }
    out
}

fn parse_postings<K: serde::de::DeserializeOwned + Ord, V: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<BTreeMap<K, V>, IndexError> {
    let text = read(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let (k, v): (K, V) = serde_json::from_str(line).map_err(|e| corrupt(path, i + 1, e))?;
        out.insert(k, v);
    }
    Ok(out)
}

fn check_field(s: &str) -> Result<(), IndexError> {
    if s.contains(['\t', '\n', '\r']) {
        Err(IndexError::Build(format!(
            "table id `{}` cannot be stored",
            s.escape_debug()
        )))
    } else {
        Ok(())
    }
}

/// Byte sizes of the anchor-only layout against materializing every version.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StorageStats {
    pub families: u64,
    pub versions: u64,
    pub anchors: u64,
    pub anchor_bytes: u64,
    pub log_bytes: u64,
    /// Every version as a full table.
    pub full_bytes: u64,
    /// Accesses made while reconstructing every version.
    pub counters: CacheCounters,
}

impl StorageStats {
    /// Anchors plus the logs needed to reach every other version.
    pub fn anchor_layout_bytes(&self) -> u64 {
        self.anchor_bytes + self.log_bytes
    }
}

impl TemporalIndex {
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        write(
            &dir.join("MANIFEST"),
            format!("format_version = {FORMAT_VERSION}\nanchor_policy = {}\n", self.policy),
        )?;
        let l1 = dir.join("level1");
        write(&l1.join("headers.postings"), postings_lines(&self.level1.headers))?;
        write(
            &l1.join("header_tokens.postings"),
            postings_lines(&self.level1.header_tokens),
        )?;
        write(&l1.join("keywords.postings"), postings_lines(&self.level1.keywords))?;
        write(&l1.join("values.postings"), postings_lines(&self.level1.values))?;

        let reps = dir.join("representatives");
        fs::create_dir_all(&reps).map_err(io_err(&reps))?;
        for (fid, rep) in &self.representatives {
            write(&reps.join(format!("{fid}.csv")), rep.table.to_csv())?;
            write(&reps.join(format!("{fid}.types")), types_line(&rep.table))?;
            let prov: String = rep
                .provenance
                .iter()
                .map(|p| p.iter().map(u32::to_string).collect::<Vec<_>>().join(",") + "\n")
                .collect();
            write(&reps.join(format!("{fid}.provenance")), prov)?;
        }

        let mut chains = String::new();
        let mut lineage = String::new();
        for (fid, chain) in &self.chains {
            for d in chain {
                check_field(&d.table_id)?;
                let tmax = d.temporal_max.map_or("-".to_string(), |v| v.to_string());
                chains.push_str(&format!(
                    "{fid}\t{}\t{}\t{}\t{tmax}\n",
                    d.ordinal,
                    d.table_id,
                    u8::from(d.anchor)
                ));
            }
            let ev: Vec<String> = self.lineages[fid]
                .evidence
                .iter()
                .map(|e| format!("{}:{:?}", e.signal, e.confidence))
                .collect();
            lineage.push_str(&format!("{fid}\t{}\n", ev.join(",")));
        }
        write(&dir.join("level2/chains.manifest"), chains)?;
        write(&dir.join("level2/lineage.manifest"), lineage)?;

        let l3 = dir.join("level3");
        fs::create_dir_all(&l3).map_err(io_err(&l3))?;
        for (fid, chain) in &self.chains {
            let (mut body, mut offsets) = (String::new(), String::new());
            for k in 0..chain.len().saturating_sub(1) as u32 {
                let block = log_block(&self.log(fid, k)?);
                offsets.push_str(&format!("{k}\t{}\t{}\n", body.len(), block.len()));
                body.push_str(&block);
            }
            write(&l3.join(format!("{fid}.log")), body)?;
            write(&l3.join(format!("{fid}.offsets")), offsets)?;
        }

        for (fid, chain) in &self.chains {
            for d in chain.iter().filter(|d| d.anchor) {
                let t = self.read_anchor(fid, d.ordinal)?;
                let base = dir.join("anchors").join(fid);
                write(&base.join(format!("{}.csv", d.ordinal)), t.to_csv())?;
                write(&base.join(format!("{}.types", d.ordinal)), types_line(&t))?;
            }
        }
        Ok(())
    }

    /// Opens a saved index. Anchors stay on disk and are read on demand.
    pub fn load(dir: &Path) -> Result<TemporalIndex, IndexError> {
        let manifest_path = dir.join("MANIFEST");
        let manifest = read(&manifest_path)?;
        let mut version = None;
        let mut policy = AnchorPolicy::default();
        for (i, line) in manifest.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| corrupt(&manifest_path, i + 1, "expected key = value"))?;
            match k.trim() {
                "format_version" => version = v.trim().parse::<u32>().ok(),
                "anchor_policy" => policy = v.trim().parse().map_err(|e| corrupt(&manifest_path, i + 1, e))?,
                other => return Err(corrupt(&manifest_path, i + 1, format!("unknown key `{other}`"))),
            }
        }
        if version != Some(FORMAT_VERSION) {
            return Err(IndexError::Corrupt(format!(
                "unsupported index format {version:?}, expected {FORMAT_VERSION}"
            )));
        }

        let l1 = dir.join("level1");
        let level1 = Level1 {
            headers: parse_postings(&l1.join("headers.postings"))?,
            header_tokens: parse_postings(&l1.join("header_tokens.postings"))?,
            keywords: parse_postings(&l1.join("keywords.postings"))?,
            values: parse_postings::<CellValue, Vec<(String, String)>>(&l1.join("values.postings"))?,
        };

        let chains_path = dir.join("level2/chains.manifest");
        let mut chains: BTreeMap<String, Vec<VersionDescriptor>> = BTreeMap::new();
        for (i, line) in read(&chains_path)?.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |m: &str| corrupt(&chains_path, i + 1, m);
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let ordinal: u32 = f[1].parse().map_err(|_| bad("bad ordinal"))?;
            let anchor = match f[3] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("bad anchor flag")),
            };
            let temporal_max = match f[4] {
                "-" => None,
                v => Some(v.parse().map_err(|_| bad("bad temporal max"))?),
            };
            let chain = chains.entry(f[0].to_string()).or_default();
            if chain.len() as u32 != ordinal {
                return Err(bad("chain ordinals are not gapless"));
            }
            chain.push(VersionDescriptor {
                table_id: f[2].to_string(),
                ordinal,
                anchor,
                temporal_max,
            });
        }

        let lineage_path = dir.join("level2/lineage.manifest");
        let mut lineages = BTreeMap::new();
        for (i, line) in read(&lineage_path)?.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |m: String| corrupt(&lineage_path, i + 1, m);
            let (fid, ev) = line.split_once('\t').ok_or_else(|| bad("expected 2 fields".into()))?;
            let chain = chains.get(fid).ok_or_else(|| bad(format!("unknown family {fid}")))?;
            let mut evidence = Vec::new();
            for item in ev.split(',').filter(|s| !s.is_empty()) {
                let (sig, conf) = item
                    .split_once(':')
                    .ok_or_else(|| bad(format!("bad evidence `{item}`")))?;
                evidence.push(Evidence {
                    signal: sig.parse().map_err(|_| bad(format!("bad signal `{sig}`")))?,
                    confidence: conf.parse().map_err(|_| bad(format!("bad confidence `{conf}`")))?,
                });
            }
            if evidence.len() + 1 != chain.len() {
                return Err(bad("evidence does not match chain length".into()));
            }
            lineages.insert(
                fid.to_string(),
                Lineage {
                    family_id: fid.to_string(),
                    order: chain.iter().map(|d| d.table_id.clone()).collect(),
                    evidence,
                },
            );
        }

        let mut representatives = BTreeMap::new();
        let reps = dir.join("representatives");
        for fid in chains.keys() {
            let table = read_typed_table(
                &reps.join(format!("{fid}.csv")),
                &reps.join(format!("{fid}.types")),
                fid,
            )?;
            let prov_path = reps.join(format!("{fid}.provenance"));
            let mut provenance = Vec::new();
            for (i, line) in read(&prov_path)?.lines().enumerate() {
                let set: Result<BTreeSet<u32>, _> = line.split(',').filter(|s| !s.is_empty()).map(str::parse).collect();
                provenance.push(set.map_err(|_| corrupt(&prov_path, i + 1, "bad ordinal"))?);
            }
            if provenance.len() != table.row_count() {
                return Err(corrupt(&prov_path, 1, "provenance does not match representative rows"));
            }
            representatives.insert(
                fid.clone(),
                RepresentativeTable {
                    family_id: fid.clone(),
                    table,
                    provenance,
                },
            );
        }

        let mut index = TemporalIndex {
            level1,
            chains,
            level3: BTreeMap::new(),
            representatives,
            lineages,
            anchors: AnchorStore::Disk(dir.join("anchors")),
            policy,
        };
        if index.lineages.len() != index.chains.len() {
            return Err(IndexError::Corrupt(
                "lineage manifest does not cover every family".into(),
            ));
        }
        let l3 = dir.join("level3");
        let fams: Vec<(String, usize)> = index.chains.iter().map(|(f, c)| (f.clone(), c.len())).collect();
        for (fid, len) in fams {
            let log_path = l3.join(format!("{fid}.log"));
            let off_path = l3.join(format!("{fid}.offsets"));
            let body = read(&log_path)?;
            let offsets = read(&off_path)?;
            let mut count = 0usize;
            for (i, line) in offsets.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
                let bad = |m: &str| corrupt(&off_path, i + 1, m);
                let f: Vec<usize> = line
                    .split('\t')
                    .map(|x| x.parse().map_err(|_| bad("bad number")))
                    .collect::<Result<_, _>>()?;
                if f.len() != 3 || f[0] != count {
                    return Err(bad("expected the next from_ordinal, offset and length"));
                }
                let block = body
                    .get(f[1]..f[1] + f[2])
                    .and_then(|b| b.strip_suffix(END_MARKER))
                    .ok_or_else(|| bad("log block is out of range or lacks its end marker"))?;
                let log = parse_log(block).map_err(|e| corrupt(&log_path, i + 1, e))?;
                if log.family_id != fid || log.from_ordinal as usize != count || !log.is_forward() {
                    return Err(bad("log header does not match its slot"));
                }
                index.insert_log(&log);
                count += 1;
            }
            if count != len.saturating_sub(1) {
                return Err(corrupt(
                    &off_path,
                    1,
                    format!("expected {} logs, found {count}", len.saturating_sub(1)),
                ));
            }
        }
        for (fid, chain) in &index.chains {
            for d in chain.iter().filter(|d| d.anchor) {
                let p: PathBuf = dir.join("anchors").join(fid).join(format!("{}.csv", d.ordinal));
                if !p.is_file() {
                    return Err(IndexError::Corrupt(format!("anchor {} is missing", p.display())));
                }
            }
        }
        Ok(index)
    }

    /// Measures both layouts. Every version is reconstructed once.
    pub fn storage_stats(&self) -> Result<StorageStats, IndexError> {
        let mut s = StorageStats::default();
        for (fid, chain) in &self.chains {
            s.families += 1;
            let cache = VersionCache::new(chain.len().max(1));
            // Walk outward from the anchors so each step reuses a neighbour.
            let mut order: Vec<u32> = chain.iter().map(|d| d.ordinal).collect();
            let anchors: Vec<u32> = chain.iter().filter(|d| d.anchor).map(|d| d.ordinal).collect();
            order.sort_by_key(|&k| anchors.iter().map(|a| a.abs_diff(k)).min().unwrap_or(0));
            for k in order {
                let t = self.fetch_version(&cache, fid, k)?;
                s.versions += 1;
                s.full_bytes += table_bytes(&t);
                if chain[k as usize].anchor {
                    s.anchors += 1;
                    s.anchor_bytes += table_bytes(&t);
                }
            }
            let c = cache.counters();
            s.counters.cold_reads += c.cold_reads;
            s.counters.log_reads += c.log_reads;
            s.counters.hits += c.hits;
            s.counters.reconstructions += c.reconstructions;
            let mut offset = 0usize;
            for k in 0..chain.len().saturating_sub(1) as u32 {
                let len = log_block(&self.log(fid, k)?).len();
                s.log_bytes += (len + format!("{k}\t{offset}\t{len}\n").len()) as u64;
                offset += len;
            }
        }
        Ok(s)
    }
}
