// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tempolake"));
    c.env_remove("TEMPOLAKE_INDEX");
    c
}

fn run(args: &[&str], index: &Path) -> Output {
    bin().args(args).env("TEMPOLAKE_INDEX", index).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["families", "--bogus"], tmp.path()).status.code(), Some(1));
    assert_eq!(run(&["--help"], tmp.path()).status.code(), Some(0));
    assert_eq!(run(&["stats"], &tmp.path().join("missing")).status.code(), Some(1));
}

#[test]
fn seasons_query_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let lake = tmp.path().join("lake");
    std::fs::create_dir(&lake).unwrap();
    let seasons = common::fixture_dir().join("seasons");
    for n in ["nba_2012", "nba_2018", "nba_2024", "fifa_2019", "fifa_2023"] {
        std::fs::copy(seasons.join(format!("{n}.csv")), lake.join(format!("{n}.csv"))).unwrap();
    }
    let index = tmp.path().join("idx");
    let o = run(&["index", "--lake", lake.to_str().unwrap()], &index);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let before = snapshot(&index);

    let out = tmp.path().join("res");
    let q = seasons.join("query.txt");
    let o = run(
        &[
            "query",
            q.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--top-k",
            "1",
        ],
        &index,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("nba_2018"), "{text}");
    let family = text.split('\t').next().unwrap().to_string();

    let anchor = tmp.path().join("anchor.csv");
    let o = run(
        &[
            "travel",
            "--family",
            &family,
            "--ordinal",
            "2",
            "--out",
            anchor.to_str().unwrap(),
        ],
        &index,
    );
    assert!(o.status.success());
    let stored = std::fs::read(index.join(format!("anchors/{family}/2.csv"))).unwrap();
    assert_eq!(std::fs::read(&anchor).unwrap(), stored);

    for args in [
        vec!["families"],
        vec!["lineage"],
        vec!["explain", "--family", &family],
        vec!["stats"],
    ] {
        let o = run(&args, &index);
        assert!(o.status.success(), "{args:?}");
        assert!(!o.stdout.is_empty());
    }
    assert_eq!(snapshot(&index), before);

    // The flag wins over the environment.
    let o = bin()
        .args(["--index", index.to_str().unwrap(), "families"])
        .env("TEMPOLAKE_INDEX", tmp.path().join("nope"))
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn synth_index_stats_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.cfg");
    std::fs::write(&cfg, "families = 6\ndistractors = 4\n").unwrap();
    let mut snaps = Vec::new();
    for run_no in 0..2 {
        let lake = tmp.path().join(format!("lake{run_no}"));
        let index = tmp.path().join(format!("idx{run_no}"));
        let o = run(
            &[
                "--seed",
                "5",
                "synth",
                "--out",
                lake.to_str().unwrap(),
                "--config",
                cfg.to_str().unwrap(),
            ],
            &index,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(&["index", "--lake", lake.to_str().unwrap()], &index);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(
            stdout(&o).contains("anchor layout <= full materialization"),
            "{}",
            stdout(&o)
        );
        let o = run(&["ingest", "--lake", lake.to_str().unwrap()], &index);
        assert!(stdout(&o).contains("ground truth: 6 families, 4 distractors"));
        snaps.push(snapshot(&index));
    }
    assert_eq!(snaps[0], snaps[1]);

    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "colour = blue\n").unwrap();
    let o = run(
        &[
            "synth",
            "--out",
            tmp.path().join("x").to_str().unwrap(),
            "--config",
            bad.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_writes_loadable_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.cfg");
    std::fs::write(&cfg, "families = 6\ndistractors = 6\n").unwrap();
    let w = tmp.path().join("w.txt");
    let o = run(
        &[
            "--seed",
            "3",
            "train",
            "--out",
            w.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (weights, seed) = tempolake::family::parse_weights(&std::fs::read_to_string(&w).unwrap()).unwrap();
    assert_eq!(seed, 3);
    assert!(weights.is_finite());

    let lake = tmp.path().join("lake");
    run(
        &[
            "synth",
            "--out",
            lake.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let o = run(
        &[
            "index",
            "--lake",
            lake.to_str().unwrap(),
            "--weights",
            w.to_str().unwrap(),
            "--anchor-policy",
            "all",
        ],
        &tmp.path().join("idx"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        &[
            "index",
            "--lake",
            lake.to_str().unwrap(),
            "--anchor-policy",
            "sometimes",
        ],
        &tmp.path().join("idx"),
    );
    assert_eq!(o.status.code(), Some(1));
}
