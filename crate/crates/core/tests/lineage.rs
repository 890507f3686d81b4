// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use tempolake::change::apply_log;
use tempolake::lineage::{drift_order, fit_affine, infer_lineage, kendall_tau, synthesize_changelog, Signal};
use tempolake::synth::{generate_lake, LakeConfig};
use tempolake::table::{CellValue, ColType, Table};

fn lake(families: usize, seed: u64) -> tempolake::synth::SyntheticLake {
    generate_lake(
        &LakeConfig {
            families,
            distractors: 0,
            ..LakeConfig::default()
        },
        seed,
    )
    .unwrap()
}

#[test]
fn synthesized_logs_replay_on_generator_pairs() {
    for fam in &lake(40, 5).families {
        for (k, w) in fam.versions.windows(2).enumerate() {
            let log = synthesize_changelog(&w[0], &w[1], &fam.family_id, k as u32).unwrap();
            assert!(log.is_canonical());
            assert!(apply_log(&w[0], &log).unwrap().content_eq(&w[1]));
        }
    }
}

#[test]
fn reversed_pairs_also_replay() {
    for fam in &lake(15, 6).families {
        for w in fam.versions.windows(2) {
            let log = synthesize_changelog(&w[1], &w[0], &fam.family_id, 0).unwrap();
            assert!(apply_log(&w[1], &log).unwrap().content_eq(&w[0]));
        }
    }
}

#[test]
fn temporal_families_are_ordered_exactly() {
    let lake = lake(40, 9);
    let mut seen = 0;
    for fam in lake.families.iter().filter(|f| f.temporal_column.is_some()) {
        seen += 1;
        let mut members: Vec<&Table> = fam.versions.iter().collect();
        members.reverse();
        let lin = infer_lineage(&fam.family_id, &members);
        let truth: Vec<String> = fam.versions.iter().map(|t| t.table_id.clone()).collect();
        assert_eq!(lin.order, truth);
        assert!(lin.evidence.iter().all(|e| e.signal == Signal::Temporal));
    }
    assert!(seen > 5);
}

#[test]
fn drift_families_are_mostly_ordered() {
    let lake = lake(60, 13);
    let taus: Vec<f64> = lake
        .families
        .iter()
        .filter(|f| f.temporal_column.is_none() && !f.drift_columns.is_empty())
        .map(|fam| {
            let members: Vec<&Table> = fam.versions.iter().rev().collect();
            let lin = infer_lineage(&fam.family_id, &members);
            let truth: Vec<String> = fam.versions.iter().map(|t| t.table_id.clone()).collect();
            kendall_tau(&lin.order, &truth)
        })
        .collect();
    assert!(!taus.is_empty());
    let mean = taus.iter().sum::<f64>() / taus.len() as f64;
    assert!(mean >= 0.8, "{taus:?}");
}

fn numeric_table(id: &str, values: &[(u8, i16)]) -> Table {
    let mut rows: Vec<Vec<CellValue>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (k, v) in values {
        if seen.insert(*k) {
            rows.push(vec![CellValue::Text(format!("e{k}")), CellValue::Integer(*v as i64)]);
        }
    }
    Table::new(
        id,
        vec!["entity".into(), "score".into()],
        vec![ColType::Text, ColType::Integer],
        rows,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn drift_is_antisymmetric(a in prop::collection::vec((0u8..20, -50i16..50), 1..20),
                              b in prop::collection::vec((0u8..20, -50i16..50), 1..20)) {
        let (ta, tb) = (numeric_table("a", &a), numeric_table("b", &b));
        let edges = drift_order(&[&ta, &tb], "score").unwrap();
        prop_assert!(edges.len() <= 1);
        let rev = drift_order(&[&tb, &ta], "score").unwrap();
        prop_assert_eq!(edges.len(), rev.len());
        if let (Some(e), Some(r)) = (edges.first(), rev.first()) {
            prop_assert_eq!(e.older, 1 - r.older);
        }
    }

    #[test]
    fn fit_recovers_exact_lines(a in -5.0f64..5.0, b in -100.0f64..100.0,
                                xs in prop::collection::btree_set(-1000i32..1000, 2..40)) {
        prop_assume!(a.abs() > 1e-3);
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x as f64, a * x as f64 + b)).collect();
        let f = fit_affine(&pts).unwrap();
        prop_assert!((f.a - a).abs() < 1e-9);
        prop_assert!((f.b - b).abs() < 1e-9);
        prop_assert!(f.r2 >= 1.0 - 1e-12);
        let mean_res = pts.iter().map(|&(x, y)| y - (f.a * x + f.b)).sum::<f64>() / pts.len() as f64;
        prop_assert!(mean_res.abs() < 1e-9);
    }

    #[test]
    fn synthesis_replays_random_pairs(a in prop::collection::vec((0u8..12, -5i16..5), 0..12),
                                      b in prop::collection::vec((0u8..12, -5i16..5), 0..12)) {
        let (ta, tb) = (numeric_table("a", &a), numeric_table("b", &b));
        let log = synthesize_changelog(&ta, &tb, "f", 0).unwrap();
        prop_assert!(apply_log(&ta, &log).unwrap().content_eq(&tb));
    }
}
