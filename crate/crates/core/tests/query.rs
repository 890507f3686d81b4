// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use tempolake::index::{AnchorPolicy, LookupMode, Probe};
use tempolake::pipeline::{run_offline, OfflineConfig};
use tempolake::query::{
    decouple, parse_query, select_version, DiscoveryQuery, Engine, QueryError, VersionClause, VersionSelector,
};
use tempolake::table::Table;

fn seasons_engine() -> Engine {
    let out = run_offline(&seasons(), &OfflineConfig::default()).unwrap();
    Engine::new(out.index, 64)
}

fn seasons_query() -> DiscoveryQuery {
    let dir = fixture_dir().join("seasons");
    parse_query(&std::fs::read_to_string(dir.join("query.txt")).unwrap(), &dir).unwrap()
}

fn nba_family(engine: &Engine) -> String {
    engine
        .index
        .family_ids()
        .find(|f| engine.index.chain(f).unwrap().iter().any(|d| d.table_id == "NBA_2018"))
        .unwrap()
        .to_string()
}

#[test]
fn seasons_families_and_lineage() {
    let engine = seasons_engine();
    assert_eq!(engine.index.family_ids().count(), 2);
    let nba = nba_family(&engine);
    let order: Vec<&str> = engine
        .index
        .chain(&nba)
        .unwrap()
        .iter()
        .map(|d| d.table_id.as_str())
        .collect();
    assert_eq!(order, ["NBA_2012", "NBA_2018", "NBA_2024"]);
}

#[test]
fn seasons_join_ranks_nba_first() {
    let engine = seasons_engine();
    let d = decouple(&seasons_query()).unwrap();
    let ranked = engine.index.lookup(&d.probe).unwrap();
    assert_eq!(ranked[0].0, nba_family(&engine));
    assert_eq!(ranked[0].1, 1.0);
    assert!(ranked.iter().skip(1).all(|r| r.1 < 1.0));
}

#[test]
fn seasons_implicit_and_argmax_agree_on_2018() {
    let engine = seasons_engine();
    let nba = nba_family(&engine);
    let d = decouple(&seasons_query()).unwrap();
    assert!(matches!(d.selector, VersionSelector::RankAgreement { .. }));
    let (implicit, ev) = select_version(&engine.index, &engine.cache, &nba, &d.selector).unwrap();
    assert_eq!(ev.column.as_deref(), Some("pts"));
    let argmax = VersionSelector::Explicit("argmax:James Harden:PTS".parse().unwrap());
    let (explicit, _) = select_version(&engine.index, &engine.cache, &nba, &argmax).unwrap();
    assert_eq!(implicit, explicit);
    assert_eq!(
        engine.index.chain(&nba).unwrap()[implicit as usize].table_id,
        "NBA_2018"
    );
    let argmin = VersionSelector::Explicit("argmin:James Harden:pts".parse().unwrap());
    let (low, _) = select_version(&engine.index, &engine.cache, &nba, &argmin).unwrap();
    assert_eq!(engine.index.chain(&nba).unwrap()[low as usize].table_id, "NBA_2024");
}

#[test]
fn seasons_end_to_end_is_repeatable() {
    let engine = seasons_engine();
    let q = seasons_query();
    let first = engine.answer(&q, 2).unwrap();
    assert_eq!(first.results[0].family_id, nba_family(&engine));
    assert_eq!(first.results[0].table_id, "NBA_2018");
    let cold = engine.cache.counters().cold_reads;
    let second = engine.answer(&q, 2).unwrap();
    assert_eq!(engine.cache.counters().cold_reads, cold);
    let strip = |a: &tempolake::query::Answer| {
        a.results
            .iter()
            .map(|r| (r.family_id.clone(), r.ordinal, r.table.clone(), r.evidence.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&first), strip(&second));
    let dir = tempfile::tempdir().unwrap();
    let files = tempolake::query::write_answer(&second, dir.path()).unwrap();
    assert!(!files.is_empty());
    let meta = std::fs::read_to_string(files[0].with_extension("meta")).unwrap();
    assert!(meta.contains("table_id = NBA_2018"), "{meta}");
}

#[test]
fn per_family_errors_do_not_abort() {
    let engine = seasons_engine();
    let mut q = seasons_query();
    q.mode = LookupMode::Union;
    q.version = VersionClause::AsOf(0);
    let a = engine.answer(&q, 5).unwrap();
    assert!(a.results.is_empty());
    assert_eq!(a.failures.len(), 2);
    assert!(a.failures.iter().all(|f| matches!(f.error, QueryError::Unsupported(_))));

    let small = Table::from_csv("q", b"Player,Rank\nJames Harden,1\nL. James,2\n").unwrap();
    q.query_table = Some(small);
    q.mode = LookupMode::Join;
    q.version = VersionClause::Implicit;
    let a = engine.answer(&q, 1).unwrap();
    assert!(matches!(
        a.failures[0].error,
        QueryError::InsufficientOverlap { found: 2 }
    ));
}

#[test]
fn all_and_ordinal_clauses() {
    let engine = seasons_engine();
    let nba = nba_family(&engine);
    let mut q = seasons_query();
    q.version = VersionClause::All;
    let a = engine.answer(&q, 1).unwrap();
    let ids: Vec<&str> = a.results.iter().map(|r| r.table_id.as_str()).collect();
    assert_eq!(ids, ["NBA_2012", "NBA_2018", "NBA_2024"]);
    let sel = |c: VersionClause| select_version(&engine.index, &engine.cache, &nba, &VersionSelector::Explicit(c));
    assert_eq!(sel(VersionClause::Ordinal(1)).unwrap().0, 1);
    assert!(matches!(
        sel(VersionClause::Ordinal(3)),
        Err(QueryError::Range { ordinal: 3, len: 3 })
    ));
    assert!(engine.answer(&q, 0).is_err());
}

#[test]
fn latest_matches_lineage_and_asof_uses_temporal_columns() {
    let lake = lake(12, 0, 31);
    let idx = ground_truth_index(&lake, AnchorPolicy::Latest);
    let engine = Engine::new(idx, 64);
    for fam in &lake.families {
        let sel = |c| {
            select_version(
                &engine.index,
                &engine.cache,
                &fam.family_id,
                &VersionSelector::Explicit(c),
            )
        };
        let (latest, _) = sel(VersionClause::Latest).unwrap();
        assert_eq!(
            latest as usize,
            engine.index.lineage(&fam.family_id).unwrap().order.len() - 1
        );
        let chain = engine.index.chain(&fam.family_id).unwrap();
        match fam.temporal_column {
            Some(_) => {
                let m1 = chain[1].temporal_max.unwrap();
                assert_eq!(sel(VersionClause::AsOf(m1)).unwrap().0, 1);
                assert_eq!(sel(VersionClause::AsOf(m1 - 1)).unwrap().0, 0);
                assert!(sel(VersionClause::AsOf(i64::MIN)).is_err());
            }
            None => assert!(matches!(sel(VersionClause::AsOf(0)), Err(QueryError::Unsupported(_)))),
        }
    }
}

#[test]
fn empty_lake_answers_nothing() {
    let out = run_offline(&[], &OfflineConfig::default()).unwrap();
    let engine = Engine::new(out.index, 4);
    let q = DiscoveryQuery {
        mode: LookupMode::Keyword,
        query_table: None,
        key_column: None,
        target_column: None,
        keywords: Some(vec!["anything".into()]),
        version: VersionClause::Latest,
    };
    let a = engine.answer(&q, 3).unwrap();
    assert!(a.results.is_empty() && a.failures.is_empty());
    assert_eq!(engine.index.lookup(&Probe::Keyword(vec!["x".into()])).unwrap(), vec![]);
}
