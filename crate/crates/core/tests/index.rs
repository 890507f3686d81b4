// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempolake::index::{AnchorPolicy, Probe, TemporalIndex, VersionCache};
use tempolake::pipeline::{run_offline, OfflineConfig};
use tempolake::table::{CellValue, Table};

#[test]
fn leagues_messi_posts_to_fifa_family() {
    let out = run_offline(&leagues(), &OfflineConfig::default()).unwrap();
    let fifa = out.families.iter().find(|f| f.member_table_ids.contains("T2")).unwrap();
    let postings = &out.index.level1.values[&CellValue::Text("L. Messi".into())];
    assert!(postings.iter().all(|(f, _)| f == &fifa.family_id));
    assert!(postings.iter().any(|(_, c)| c == "player"));
}

#[test]
fn forward_and_backward_travel_match_generator() {
    let lake = lake(12, 0, 3);
    let idx = ground_truth_index(&lake, AnchorPolicy::Latest);
    for fam in &lake.families {
        let v = &fam.versions;
        let last = v.len() as u32 - 1;
        let fwd = idx.travel(&fam.family_id, 0, 2, v[0].clone()).unwrap();
        assert!(fwd.content_eq(&v[2]));
        assert_eq!(fwd.table_id, v[2].table_id);
        let back = idx.travel(&fam.family_id, last, 0, v[last as usize].clone()).unwrap();
        assert!(back.content_eq(&v[0]));
        let same = idx.travel(&fam.family_id, 1, 1, v[1].clone()).unwrap();
        assert_eq!(same, v[1]);
    }
}

#[test]
fn fetch_matches_generator_under_every_policy() {
    let lake = lake(10, 0, 8);
    for policy in [
        AnchorPolicy::Latest,
        AnchorPolicy::Earliest,
        AnchorPolicy::All,
        AnchorPolicy::EveryNth(2),
    ] {
        let idx = ground_truth_index(&lake, policy);
        let cache = VersionCache::new(3);
        for fam in &lake.families {
            for (k, v) in fam.versions.iter().enumerate() {
                let got = idx.fetch_version(&cache, &fam.family_id, k as u32).unwrap();
                assert!(got.content_eq(v), "{policy} {} {k}", fam.family_id);
            }
        }
        assert!(cache.len() <= 3);
    }
}

#[test]
fn cache_protocol_counters() {
    let lake = lake(3, 0, 11);
    let idx = ground_truth_index(&lake, AnchorPolicy::Latest);
    let fam = &lake.families[0];
    let last = fam.versions.len() as u32 - 1;
    let cache = VersionCache::default();

    idx.fetch_version(&cache, &fam.family_id, last).unwrap();
    let c0 = cache.counters();
    assert_eq!((c0.cold_reads, c0.reconstructions), (1, 0));
    idx.fetch_version(&cache, &fam.family_id, last).unwrap();
    let c1 = cache.counters();
    assert_eq!(c1.cold_reads, c0.cold_reads);
    assert_eq!(c1.hits, c0.hits + 1);

    let prev = idx.fetch_version(&cache, &fam.family_id, last - 1).unwrap();
    let c2 = cache.counters();
    assert!(prev.content_eq(&fam.versions[last as usize - 1]));
    assert_eq!(c2.cold_reads, c1.cold_reads);
    assert_eq!(c2.log_reads, c1.log_reads + 1);
    assert_eq!(c2.reconstructions, c1.reconstructions + 1);

    assert!(idx.fetch_version(&cache, "nope", 0).is_err());
    assert!(idx.fetch_version(&cache, &fam.family_id, last + 1).is_err());
}

#[test]
fn lookup_equals_brute_force() {
    let lake = lake(15, 10, 17);
    let tables: Vec<Table> = lake.tables().cloned().collect();
    let out = run_offline(&tables, &OfflineConfig::default()).unwrap();
    let reps: Vec<_> = out.index.representatives().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let probe = random_probe(&mut rng, &reps);
        assert_eq!(
            out.index.lookup(&probe).unwrap(),
            brute_force_lookup(&reps, &probe),
            "{probe:?}"
        );
    }
}

#[test]
fn persisted_index_round_trips() {
    let lake = lake(6, 4, 23);
    let tables: Vec<Table> = lake.tables().cloned().collect();
    let out = run_offline(&tables, &OfflineConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    out.index.save(dir.path()).unwrap();
    let loaded = TemporalIndex::load(dir.path()).unwrap();
    assert_eq!(loaded.level1, out.index.level1);
    assert_eq!(
        loaded.family_ids().collect::<Vec<_>>(),
        out.index.family_ids().collect::<Vec<_>>()
    );
    let by_id: std::collections::HashMap<&str, &Table> = tables.iter().map(|t| (t.table_id.as_str(), t)).collect();
    let cache = VersionCache::default();
    for fid in loaded.family_ids() {
        assert_eq!(loaded.lineage(fid).unwrap(), out.index.lineage(fid).unwrap());
        assert_eq!(
            loaded.representative(fid).unwrap(),
            out.index.representative(fid).unwrap()
        );
        for d in loaded.chain(fid).unwrap() {
            let t = loaded.fetch_version(&cache, fid, d.ordinal).unwrap();
            assert!(t.content_eq(by_id[d.table_id.as_str()]));
        }
    }
    let probe = Probe::Keyword(vec!["player".into()]);
    assert_eq!(loaded.lookup(&probe).unwrap(), out.index.lookup(&probe).unwrap());

    let again = tempfile::tempdir().unwrap();
    loaded.save(again.path()).unwrap();
    assert_eq!(snapshot(dir.path()), snapshot(again.path()));
}

fn snapshot(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn corrupt_index_is_rejected() {
    let lake = lake(3, 0, 2);
    let idx = ground_truth_index(&lake, AnchorPolicy::Latest);
    let dir = tempfile::tempdir().unwrap();
    idx.save(dir.path()).unwrap();
    let fid = &lake.families[0].family_id;
    let log = dir.path().join(format!("level3/{fid}.log"));
    let text = std::fs::read_to_string(&log).unwrap();
    std::fs::write(&log, text.replacen("%end", "%nope", 1)).unwrap();
    assert!(TemporalIndex::load(dir.path()).is_err());
    std::fs::write(dir.path().join("MANIFEST"), "format_version = 99\n").unwrap();
    assert!(TemporalIndex::load(dir.path()).is_err());
}

#[test]
fn anchor_layout_is_smaller_on_default_lake() {
    let lake = lake(50, 0, 42);
    let idx = ground_truth_index(&lake, AnchorPolicy::Latest);
    let s = idx.storage_stats().unwrap();
    assert_eq!(s.anchors, 50);
    assert!(s.anchor_layout_bytes() <= s.full_bytes, "{s:?}");
}
