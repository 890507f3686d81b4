// SPDX-License-Identifier: Apache-2.0

//! Generator config files and the on-disk lake layout.
//!
//! A lake directory holds one `<table_id>.csv` per table, a tab-separated
//! `ground_truth.manifest`, and `logs/<family>_<k>.log` for each true step.

use std::fs;
use std::path::Path;

use super::{FamilyConfig, LakeConfig, SynthError, SyntheticLake};
use crate::change::write_log;

fn parse_range(v: &str) -> Option<(usize, usize)> {
    let (lo, hi) = v.split_once("..").unwrap_or((v, v));
    Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?))
}

/// Parses a flat `key = value` config. Blank lines and `#` comments are
/// skipped. Unset keys keep their defaults.
///
/// Ranges are written `lo..hi` (inclusive) or as a single number.
pub fn parse_config(text: &str) -> Result<LakeConfig, SynthError> {
    let mut c = LakeConfig::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| SynthError::Config(format!("line {}: {m}", n + 1));
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
        let (k, v) = (k.trim(), v.trim());
        let num = || v.parse::<f64>().map_err(|_| err("expected a number"));
        let count = || v.parse::<usize>().map_err(|_| err("expected a count"));
        let range = || parse_range(v).ok_or_else(|| err("expected lo..hi"));
        let f: &mut FamilyConfig = &mut c.family;
        match k {
            "families" => c.families = count()?,
            "distractors" => c.distractors = count()?,
            "shared_vocab_rate" => c.shared_vocab_rate = num()?,
            "temporal_rate" => c.temporal_rate = num()?,
            "drift_rate" => c.drift_rate = num()?,
            "entities" => f.entities = range()?,
            "versions" => f.versions = range()?,
            "ops_per_step" => f.ops_per_step = range()?,
            "semantic_drift" => f.semantic_drift = v.parse().map_err(|_| err("expected true or false"))?,
            "mix.update_cell" => f.op_mix.update_cell = num()?,
            "mix.add_row" => f.op_mix.add_row = num()?,
            "mix.delete_row" => f.op_mix.delete_row = num()?,
            "mix.add_column" => f.op_mix.add_column = num()?,
            "mix.drop_column" => f.op_mix.drop_column = num()?,
            "mix.rename_column" => f.op_mix.rename_column = num()?,
            "mix.affine" => f.op_mix.affine = num()?,
            "mix.noop" => f.op_mix.noop = num()?,
            _ => return Err(err(&format!("unknown key `{k}`"))),
        }
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestFamily {
    pub family_id: String,
    /// Table ids by ordinal.
    pub table_ids: Vec<String>,
    pub drift_columns: Vec<String>,
    pub temporal_column: Option<String>,
}

/// Ground truth of a lake written by [`write_lake`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LakeManifest {
    pub seed: u64,
    pub families: Vec<ManifestFamily>,
    pub distractors: Vec<String>,
}

pub const MANIFEST_FILE: &str = "ground_truth.manifest";

pub fn write_lake(lake: &SyntheticLake, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir.join("logs"))?;
    let mut manifest = format!("seed\t{}\n", lake.generator_seed);
    for f in &lake.families {
        let ids: Vec<&str> = f.versions.iter().map(|t| t.table_id.as_str()).collect();
        manifest.push_str(&format!(
            "family\t{}\t{}\t{}\t{}\n",
            f.family_id,
            ids.join(","),
            f.drift_columns.join(","),
            f.temporal_column.as_deref().unwrap_or("")
        ));
        for (k, log) in f.true_logs.iter().enumerate() {
            fs::write(
                dir.join("logs").join(format!("{}_{k}.log", f.family_id)),
                write_log(log),
            )?;
        }
    }
    for d in &lake.distractors {
        manifest.push_str(&format!("distractor\t{}\n", d.table_id));
    }
    for t in lake.tables() {
        fs::write(dir.join(format!("{}.csv", t.table_id)), t.to_csv())?;
    }
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<LakeManifest, SynthError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let mut out = LakeManifest {
        seed: 0,
        families: Vec::new(),
        distractors: Vec::new(),
    };
    let list = |s: &str| -> Vec<String> { s.split(',').filter(|x| !x.is_empty()).map(String::from).collect() };
    for (n, line) in text.lines().enumerate() {
        let bad = |m: &str| SynthError::Manifest {
            line: n + 1,
            message: m.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [] | [""] => {}
            ["seed", s] => out.seed = s.parse().map_err(|_| bad("bad seed"))?,
            ["family", id, ids, drift, temporal] => out.families.push(ManifestFamily {
                family_id: id.to_string(),
                table_ids: list(ids),
                drift_columns: list(drift),
                temporal_column: (!temporal.is_empty()).then(|| temporal.to_string()),
            }),
            ["distractor", id] => out.distractors.push(id.to_string()),
            _ => return Err(bad("unrecognized record")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_lake;
    use crate::table::Table;

    #[test]
    fn config_parsing() {
        let c = parse_config("families = 4\n# note\nversions = 2..3\nmix.noop=0.5 # trailing\n").unwrap();
        assert_eq!(c.families, 4);
        assert_eq!(c.family.versions, (2, 3));
        assert_eq!(c.family.op_mix.noop, 0.5);
        assert!(parse_config("versions = 1").is_err());
        assert!(parse_config("colour = red").is_err());
        assert!(parse_config("families").is_err());
    }

    #[test]
    fn lake_round_trip_on_disk() {
        let cfg = parse_config("families = 3\ndistractors = 4").unwrap();
        let lake = generate_lake(&cfg, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_lake(&lake, dir.path()).unwrap();
        let m = read_manifest(dir.path()).unwrap();
        assert_eq!(m.seed, 11);
        assert_eq!(m.families.len(), 3);
        assert_eq!(m.distractors.len(), 4);
        for t in lake.tables() {
            let bytes = fs::read(dir.path().join(format!("{}.csv", t.table_id))).unwrap();
            let back = Table::from_csv(t.table_id.clone(), &bytes).unwrap();
            assert!(back.content_eq(t), "{}", t.table_id);
            assert_eq!(back.col_types(), t.col_types());
        }
    }
}
