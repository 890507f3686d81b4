// SPDX-License-Identifier: Apache-2.0

//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use tempolake::family::{build_representative, RepresentativeTable, VersionFamily};
use tempolake::index::{build_index, text_tokens, AnchorPolicy, NormalizedProbe, Probe, TemporalIndex};
use tempolake::lineage::{Evidence, Lineage, Signal};
use tempolake::synth::{generate_lake, LakeConfig, SyntheticLake};
use tempolake::table::{header_tokens, CellValue, Table};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Loads a fixture; the id is the uppercased file stem.
pub fn fixture(name: &str) -> Table {
    let path = fixture_dir().join(name);
    let id = path.file_stem().unwrap().to_string_lossy().to_uppercase();
    Table::from_csv(id, &std::fs::read(path).unwrap()).unwrap()
}

pub fn leagues() -> Vec<Table> {
    ["t1", "t2", "t3", "t4", "t5"]
        .iter()
        .map(|n| fixture(&format!("leagues/{n}.csv")))
        .collect()
}

pub fn seasons() -> Vec<Table> {
    ["nba_2012", "nba_2018", "nba_2024", "fifa_2019", "fifa_2023"]
        .iter()
        .map(|n| fixture(&format!("seasons/{n}.csv")))
        .collect()
}

pub fn lake(families: usize, distractors: usize, seed: u64) -> SyntheticLake {
    generate_lake(
        &LakeConfig {
            families,
            distractors,
            ..LakeConfig::default()
        },
        seed,
    )
    .unwrap()
}

/// Index over the generator's own families, order and logs.
pub fn ground_truth_index(lake: &SyntheticLake, policy: AnchorPolicy) -> TemporalIndex {
    let tables: Vec<Table> = lake.tables().cloned().collect();
    let mut fams = Vec::new();
    let mut lins = Vec::new();
    let mut logs = Vec::new();
    let mut reps = Vec::new();
    for f in &lake.families {
        let ids: Vec<String> = f.versions.iter().map(|t| t.table_id.clone()).collect();
        fams.push(VersionFamily {
            family_id: f.family_id.clone(),
            member_table_ids: ids.iter().cloned().collect(),
            pair_scores: BTreeMap::new(),
        });
        lins.push(Lineage {
            family_id: f.family_id.clone(),
            order: ids,
            evidence: vec![
                Evidence {
                    signal: Signal::Tiebreak,
                    confidence: 0.0
                };
                f.versions.len() - 1
            ],
        });
        logs.extend(f.true_logs.iter().cloned());
        let members: Vec<&Table> = f.versions.iter().collect();
        reps.push(build_representative(&f.family_id, &members).unwrap());
    }
    build_index(&tables, &fams, &lins, &logs, &reps, policy).unwrap()
}

/// Exhaustive scoring over every representative table.
pub fn brute_force_lookup(reps: &[&RepresentativeTable], probe: &Probe) -> Vec<(String, f64)> {
    let p = NormalizedProbe::new(probe).unwrap();
    let mut out = Vec::new();
    for rep in reps {
        let t = &rep.table;
        let score = match &p {
            NormalizedProbe::Join(values) => (0..t.arity())
                .map(|j| {
                    let col: BTreeSet<&CellValue> = t.column(j).filter(|c| !c.is_null()).collect();
                    values.iter().filter(|v| col.contains(v)).count() as f64 / values.len() as f64
                })
                .fold(0.0, f64::max),
            NormalizedProbe::Union(headers) => {
                let r: BTreeSet<&String> = t.headers().iter().collect();
                let inter = headers.iter().filter(|h| r.contains(h)).count();
                inter as f64 / (headers.len() + r.len() - inter) as f64
            }
            NormalizedProbe::Keyword(tokens) => {
                let mut vocab: BTreeSet<String> = BTreeSet::new();
                for h in t.headers() {
                    vocab.extend(header_tokens(h).map(str::to_lowercase));
                }
                for c in t.rows().iter().flatten().filter(|c| !c.is_null()) {
                    vocab.extend(text_tokens(&c.render()));
                }
                tokens.iter().filter(|k| vocab.contains(*k)).count() as f64 / tokens.len() as f64
            }
        };
        if score > 0.0 {
            out.push((rep.family_id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// A probe mixing values, headers or tokens from a few representatives with
/// noise that matches nothing.
pub fn random_probe(rng: &mut impl rand::Rng, reps: &[&RepresentativeTable]) -> Probe {
    use rand::seq::SliceRandom;
    use rand::Rng as _;
    let pick = |rng: &mut dyn rand::RngCore| reps[rng.gen_range(0..reps.len())];
    match rng.gen_range(0..3) {
        0 => {
            let mut values = Vec::new();
            for _ in 0..rng.gen_range(1..3) {
                let t = &pick(rng).table;
                let j = rng.gen_range(0..t.arity());
                let col: Vec<&CellValue> = t.column(j).collect();
                let n = rng.gen_range(1..=col.len().max(1));
                values.extend(col.choose_multiple(rng, n).map(|c| (*c).clone()));
            }
            values.push(CellValue::Text(format!("zz-nomatch-{}", rng.gen::<u16>())));
            Probe::Join(values)
        }
        1 => {
            let mut headers: Vec<String> = Vec::new();
            for _ in 0..rng.gen_range(1..3) {
                let t = &pick(rng).table;
                let n = rng.gen_range(1..=t.arity());
                headers.extend(t.headers().choose_multiple(rng, n).cloned());
            }
            if rng.gen_bool(0.5) {
                headers.push("nomatch_header".into());
            }
            Probe::Union(headers)
        }
        _ => {
            let mut words: Vec<String> = Vec::new();
            for _ in 0..rng.gen_range(1..4) {
                let t = &pick(rng).table;
                if rng.gen_bool(0.5) {
                    words.push(t.headers()[rng.gen_range(0..t.arity())].clone());
                } else if t.row_count() > 0 {
                    let row = &t.rows()[rng.gen_range(0..t.row_count())];
                    words.push(row[rng.gen_range(0..row.len())].render());
                }
            }
            words.push("qqqnomatch".into());
            Probe::Keyword(words)
        }
    }
}
