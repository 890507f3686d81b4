// SPDX-License-Identifier: Apache-2.0

//! Synthetic temporal lakes with known version families, lineages and change
//! logs. The generator builds every next version directly and records the
//! ops it used, so its stored versions serve as the oracle for replay,
//! diffing and time travel.

mod io;
pub(crate) mod vocab;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::change::{affine_image, affine_restore_list, ChangeLog, ChangeOp, KeyColumns};
use crate::table::{CellValue, ColType, Table};

pub use self::io::{parse_config, read_manifest, write_lake, LakeManifest, ManifestFamily, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("generator produced an invalid table: {0}")]
    Table(#[from] crate::table::TableError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manifest at line {line}: {message}")]
    Manifest { line: usize, message: String },
}

/// Relative weights of the per-step operations.
#[derive(Debug, Clone, PartialEq)]
pub struct OpMix {
    pub update_cell: f64,
    pub add_row: f64,
    pub delete_row: f64,
    pub add_column: f64,
    pub drop_column: f64,
    pub rename_column: f64,
    pub affine: f64,
    pub noop: f64,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix {
            update_cell: 0.35,
            add_row: 0.15,
            delete_row: 0.10,
            add_column: 0.10,
            drop_column: 0.05,
            rename_column: 0.10,
            affine: 0.05,
            noop: 0.10,
        }
    }
}

impl OpMix {
    /// A mix that only ever emits `kind`.
    pub fn only(kind: OpKind) -> OpMix {
        let mut mix = OpMix {
            update_cell: 0.0,
            add_row: 0.0,
            delete_row: 0.0,
            add_column: 0.0,
            drop_column: 0.0,
            rename_column: 0.0,
            affine: 0.0,
            noop: 0.0,
        };
        *mix.weight_mut(kind) = 1.0;
        mix
    }

    fn weight_mut(&mut self, kind: OpKind) -> &mut f64 {
        match kind {
            OpKind::UpdateCell => &mut self.update_cell,
            OpKind::AddRow => &mut self.add_row,
            OpKind::DeleteRow => &mut self.delete_row,
            OpKind::AddColumn => &mut self.add_column,
            OpKind::DropColumn => &mut self.drop_column,
            OpKind::RenameColumn => &mut self.rename_column,
            OpKind::Affine => &mut self.affine,
            OpKind::Noop => &mut self.noop,
        }
    }

    fn weights(&self) -> [(OpKind, f64); 8] {
        [
            (OpKind::UpdateCell, self.update_cell),
            (OpKind::AddRow, self.add_row),
            (OpKind::DeleteRow, self.delete_row),
            (OpKind::AddColumn, self.add_column),
            (OpKind::DropColumn, self.drop_column),
            (OpKind::RenameColumn, self.rename_column),
            (OpKind::Affine, self.affine),
            (OpKind::Noop, self.noop),
        ]
    }

    fn sample(&self, rng: &mut impl Rng) -> OpKind {
        let total: f64 = self.weights().iter().map(|(_, w)| w).sum();
        let mut x = rng.gen::<f64>() * total;
        for (kind, w) in self.weights() {
            if x < w {
                return kind;
            }
            x -= w;
        }
        OpKind::Noop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    UpdateCell,
    AddRow,
    DeleteRow,
    AddColumn,
    DropColumn,
    RenameColumn,
    Affine,
    Noop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyConfig {
    /// Inclusive range of base-table entity counts.
    pub entities: (usize, usize),
    /// Inclusive range of version counts, at least 2.
    pub versions: (usize, usize),
    /// Inclusive range of sampled ops per lineage step.
    pub ops_per_step: (usize, usize),
    pub op_mix: OpMix,
    /// Adds a timestamp column whose maximum strictly increases per version.
    pub temporal: bool,
    /// Adds a drift column that grows for every surviving entity each step.
    pub drift: bool,
    /// Rescales one numeric column per step.
    pub semantic_drift: bool,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            entities: (15, 40),
            versions: (3, 6),
            ops_per_step: (2, 6),
            op_mix: OpMix::default(),
            temporal: false,
            drift: false,
            semantic_drift: false,
        }
    }
}

impl FamilyConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.versions.0 < 2 {
            return bad("version count must be at least 2");
        }
        if self.versions.0 > self.versions.1
            || self.entities.0 > self.entities.1
            || self.ops_per_step.0 > self.ops_per_step.1
        {
            return bad("range minimum exceeds maximum");
        }
        if self.entities.0 < 6 {
            return bad("entity count must be at least 6");
        }
        let weights = self.op_mix.weights();
        if weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) || weights.iter().map(|(_, w)| w).sum::<f64>() <= 0.0
        {
            return bad("op mix weights must be non-negative with a positive sum");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LakeConfig {
    pub families: usize,
    pub distractors: usize,
    /// Fraction of each family's entity names reused from earlier families,
    /// and fraction of distractors built on a family schema.
    pub shared_vocab_rate: f64,
    pub temporal_rate: f64,
    pub drift_rate: f64,
    pub family: FamilyConfig,
}

impl Default for LakeConfig {
    fn default() -> Self {
        LakeConfig {
            families: 50,
            distractors: 100,
            shared_vocab_rate: 0.3,
            temporal_rate: 0.5,
            drift_rate: 0.5,
            family: FamilyConfig::default(),
        }
    }
}

impl LakeConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("shared_vocab_rate", self.shared_vocab_rate),
            ("temporal_rate", self.temporal_rate),
            ("drift_rate", self.drift_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::Config(format!("{name} must be in [0, 1]")));
            }
        }
        self.family.validate()
    }
}

/// One generated family with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyGroundTruth {
    pub family_id: String,
    /// Ordinal 0 is the oldest version.
    pub versions: Vec<Table>,
    pub true_logs: Vec<ChangeLog>,
    pub drift_columns: Vec<String>,
    pub temporal_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLake {
    pub families: Vec<FamilyGroundTruth>,
    pub distractors: Vec<Table>,
    pub generator_seed: u64,
}

impl SyntheticLake {
    /// Every table in the lake: family versions in family order, then
    /// distractors.
    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.families
            .iter()
            .flat_map(|f| f.versions.iter())
            .chain(self.distractors.iter())
    }

    /// Ground-truth label of each table id (`None` for distractors).
    pub fn labels(&self) -> HashMap<&str, Option<&str>> {
        let mut out = HashMap::new();
        for f in &self.families {
            for v in &f.versions {
                out.insert(v.table_id.as_str(), Some(f.family_id.as_str()));
            }
        }
        for d in &self.distractors {
            out.insert(d.table_id.as_str(), None);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum NameKind {
    Person,
    City,
    Company,
    Title,
}

#[derive(Debug, Clone, Copy)]
enum Gen {
    Cat(&'static [&'static str]),
    Int(i64, i64),
    /// Uniform with one decimal place.
    Real(f64, f64),
}

impl Gen {
    fn col_type(self) -> ColType {
        match self {
            Gen::Cat(_) => ColType::Text,
            Gen::Int(..) => ColType::Integer,
            Gen::Real(..) => ColType::Real,
        }
    }

    fn sample(self, rng: &mut impl Rng) -> CellValue {
        match self {
            Gen::Cat(words) => CellValue::Text(words.choose(rng).expect("non-empty vocabulary").to_string()),
            Gen::Int(lo, hi) => CellValue::Integer(rng.gen_range(lo..=hi)),
            Gen::Real(lo, hi) => CellValue::Real((rng.gen_range(lo..hi) * 10.0).round() / 10.0),
        }
    }
}

struct ColumnSpec {
    name: &'static str,
    gen: Gen,
    synonyms: &'static [&'static str],
}

const fn col(name: &'static str, gen: Gen, synonyms: &'static [&'static str]) -> ColumnSpec {
    ColumnSpec { name, gen, synonyms }
}

struct Template {
    entity: &'static str,
    kind: NameKind,
    columns: &'static [ColumnSpec],
    drift: Option<ColumnSpec>,
}

static FAMILY_TEMPLATES: &[Template] = &[
    Template {
        entity: "player",
        kind: NameKind::Person,
        columns: &[
            col("team", Gen::Cat(vocab::NBA_TEAMS), &["squad", "franchise"]),
            col("position", Gen::Cat(vocab::NBA_POSITIONS), &["pos", "role"]),
            col("points", Gen::Real(2.0, 35.0), &["pts", "avg_points"]),
            col("height", Gen::Int(180, 225), &["height_cm", "ht"]),
            col("weight", Gen::Int(75, 130), &["weight_kg", "wt"]),
            col("games", Gen::Int(10, 82), &["gp", "games_played"]),
            col("rebounds", Gen::Real(0.5, 14.0), &["reb", "rpg"]),
            col("assists", Gen::Real(0.3, 11.0), &["ast", "apg"]),
        ],
        drift: Some(col("age", Gen::Int(19, 36), &[])),
    },
    Template {
        entity: "player",
        kind: NameKind::Person,
        columns: &[
            col("team", Gen::Cat(vocab::CLUBS), &["club", "squad"]),
            col("position", Gen::Cat(vocab::FOOTBALL_POSITIONS), &["pos", "role"]),
            col("points", Gen::Int(55, 99), &["rating", "overall"]),
            col("height", Gen::Int(160, 200), &["height_cm", "ht"]),
            col("goals", Gen::Int(0, 40), &["scored", "goal_count"]),
            col("nationality", Gen::Cat(vocab::COUNTRIES), &["nation", "country"]),
            col("caps", Gen::Int(0, 120), &["appearances", "intl_caps"]),
        ],
        drift: Some(col("age", Gen::Int(17, 34), &[])),
    },
    Template {
        entity: "city",
        kind: NameKind::City,
        columns: &[
            col("country", Gen::Cat(vocab::COUNTRIES), &["nation", "state"]),
            col("population", Gen::Int(20_000, 9_000_000), &["pop", "inhabitants"]),
            col("area", Gen::Real(10.0, 2500.0), &["area_km2", "surface"]),
            col("elevation", Gen::Int(0, 2400), &["altitude", "elev"]),
            col("founded", Gen::Int(800, 1950), &["established", "year_founded"]),
            col("mayor_party", Gen::Cat(vocab::SECTORS), &["ruling_party", "party"]),
        ],
        drift: Some(col("years_since_census", Gen::Int(1, 9), &[])),
    },
    Template {
        entity: "company",
        kind: NameKind::Company,
        columns: &[
            col("sector", Gen::Cat(vocab::SECTORS), &["industry", "segment"]),
            col("revenue", Gen::Real(1.0, 900.0), &["sales", "turnover"]),
            col("employees", Gen::Int(50, 250_000), &["staff", "headcount"]),
            col(
                "hq_country",
                Gen::Cat(vocab::COUNTRIES),
                &["headquarters", "base_country"],
            ),
            col("founded", Gen::Int(1850, 2020), &["established", "year_founded"]),
            col("margin", Gen::Real(-5.0, 40.0), &["profit_margin", "net_margin"]),
        ],
        drift: Some(col("years_listed", Gen::Int(1, 60), &[])),
    },
    Template {
        entity: "title",
        kind: NameKind::Title,
        columns: &[
            col("genre", Gen::Cat(vocab::GENRES), &["category", "kind"]),
            col("year", Gen::Int(1950, 2023), &["release_year", "released"]),
            col("rating", Gen::Real(1.0, 10.0), &["score", "stars"]),
            col("runtime", Gen::Int(70, 200), &["minutes", "length"]),
            col("box_office", Gen::Real(0.1, 900.0), &["gross", "earnings"]),
            col("country", Gen::Cat(vocab::COUNTRIES), &["origin", "made_in"]),
        ],
        drift: Some(col("weeks_in_release", Gen::Int(1, 30), &[])),
    },
];

static DISTRACTOR_TEMPLATES: &[Template] = &[
    Template {
        entity: "station",
        kind: NameKind::City,
        columns: &[
            col("rainfall", Gen::Real(0.0, 300.0), &[]),
            col("humidity", Gen::Int(10, 100), &[]),
            col("wind_speed", Gen::Real(0.0, 80.0), &[]),
            col("climate_zone", Gen::Cat(vocab::GENRES), &[]),
        ],
        drift: None,
    },
    Template {
        entity: "product",
        kind: NameKind::Title,
        columns: &[
            col("price", Gen::Real(0.5, 400.0), &[]),
            col("stock", Gen::Int(0, 5000), &[]),
            col("supplier", Gen::Cat(vocab::SECTORS), &[]),
            col("discount", Gen::Int(0, 70), &[]),
        ],
        drift: None,
    },
];

const TEMPORAL_COLUMN: &str = "last_updated";
const DAY: i64 = 86_400;

/// Entity name vocabulary shared by all families of one lake.
#[derive(Default)]
struct Names {
    used: HashSet<String>,
    reusable: HashMap<NameKind, Vec<String>>,
}

impl Names {
    fn fresh(&mut self, kind: NameKind, rng: &mut impl Rng) -> String {
        for attempt in 0.. {
            let name = match kind {
                NameKind::Person if attempt < 64 => format!(
                    "{}. {}",
                    (b'A' + rng.gen_range(0..26u8)) as char,
                    vocab::SURNAMES.choose(rng).unwrap()
                ),
                NameKind::Person => format!(
                    "{} {}",
                    vocab::FIRST_NAMES.choose(rng).unwrap(),
                    vocab::SURNAMES.choose(rng).unwrap()
                ),
                NameKind::City => format!(
                    "{}{}",
                    vocab::CITY_ROOTS.choose(rng).unwrap(),
                    vocab::CITY_SUFFIXES.choose(rng).unwrap()
                ),
                NameKind::Company => format!(
                    "{} {}",
                    vocab::SURNAMES.choose(rng).unwrap(),
                    vocab::COMPANY_SUFFIXES.choose(rng).unwrap()
                ),
                NameKind::Title => format!(
                    "{} {}",
                    vocab::TITLE_ADJECTIVES.choose(rng).unwrap(),
                    vocab::TITLE_NOUNS.choose(rng).unwrap()
                ),
            };
            // Long-exhausted pools fall back to numbered names.
            let name = if attempt > 200 {
                format!("{name} {attempt}")
            } else {
                name
            };
            if self.used.insert(name.clone()) {
                return name;
            }
        }
        unreachable!()
    }

    /// `count` entity names, `reuse` of them drawn from earlier families.
    fn draw(&mut self, kind: NameKind, count: usize, reuse: usize, rng: &mut impl Rng) -> Vec<String> {
        let pool = self.reusable.get(&kind).cloned().unwrap_or_default();
        let mut names: Vec<String> = pool.choose_multiple(rng, reuse.min(pool.len())).cloned().collect();
        while names.len() < count {
            names.push(self.fresh(kind, rng));
        }
        names.shuffle(rng);
        names
    }

    fn publish(&mut self, kind: NameKind, names: &[String]) {
        let pool = self.reusable.entry(kind).or_default();
        let known: HashSet<&String> = pool.iter().collect();
        let new: Vec<String> = names.iter().filter(|n| !known.contains(n)).cloned().collect();
        pool.extend(new);
    }
}

#[derive(Default)]
struct Ids(HashSet<String>);

impl Ids {
    fn next(&mut self, rng: &mut impl Rng) -> String {
        loop {
            let id = format!("t{:08x}", rng.gen::<u32>());
            if self.0.insert(id.clone()) {
                return id;
            }
        }
    }
}

#[derive(Clone)]
struct ColState {
    name: String,
    base: &'static str,
    gen: Option<Gen>,
    synonyms: &'static [&'static str],
    renames: usize,
}

struct FamilyState<'a> {
    template: &'a Template,
    table: Table,
    cols: Vec<ColState>,
    key: String,
    temporal: bool,
    drift: Option<String>,
    semantic_drift: bool,
    max_ts: i64,
}

fn base_table(
    rng: &mut ChaCha8Rng,
    template: &'static Template,
    entities: &[String],
    temporal: bool,
    drift: bool,
    id: String,
) -> Result<(Table, Vec<ColState>, i64), SynthError> {
    let mut chosen: Vec<&ColumnSpec> = template.columns.iter().collect();
    chosen.shuffle(rng);
    let keep = rng.gen_range(3..=chosen.len().min(6));
    chosen.truncate(keep);
    // Keep the template's column order for readability.
    chosen.sort_by_key(|c| template.columns.iter().position(|t| t.name == c.name));

    let mut cols = vec![ColState {
        name: template.entity.to_string(),
        base: template.entity,
        gen: None,
        synonyms: &[],
        renames: 0,
    }];
    for spec in chosen.iter().copied().chain(template.drift.as_ref().filter(|_| drift)) {
        cols.push(ColState {
            name: spec.name.to_string(),
            base: spec.name,
            gen: Some(spec.gen),
            synonyms: spec.synonyms,
            renames: 0,
        });
    }
    let ts_base = 1_420_070_400 + rng.gen_range(0..2000) * DAY; // from 2015-01-01
    let mut max_ts = ts_base;
    let mut rows = Vec::with_capacity(entities.len());
    for name in entities {
        let mut row: Vec<CellValue> = cols
            .iter()
            .map(|c| c.gen.map_or_else(|| CellValue::Text(name.clone()), |g| g.sample(rng)))
            .collect();
        if temporal {
            let ts = ts_base - rng.gen_range(0..700) * DAY;
            row.push(CellValue::Timestamp(ts));
        }
        rows.push(row);
    }
    if temporal {
        max_ts = rows
            .iter()
            .filter_map(|r| match r.last() {
                Some(CellValue::Timestamp(t)) => Some(*t),
                _ => None,
            })
            .max()
            .unwrap_or(ts_base);
        cols.push(ColState {
            name: TEMPORAL_COLUMN.to_string(),
            base: TEMPORAL_COLUMN,
            gen: None,
            synonyms: &[],
            renames: 0,
        });
    }
    let headers = cols.iter().map(|c| c.name.clone()).collect();
    let types = cols
        .iter()
        .map(|c| match (c.gen, c.base) {
            (Some(g), _) => g.col_type(),
            (None, TEMPORAL_COLUMN) => ColType::Timestamp,
            (None, _) => ColType::Text,
        })
        .collect();
    let table = Table::new(id, headers, types, rows)?;
    Ok((table, cols, max_ts))
}

#[derive(Clone, Copy)]
enum Origin {
    Source(usize),
    New(usize),
}

impl FamilyState<'_> {
    fn is_protected(&self, j: usize) -> bool {
        let name = &self.cols[j].name;
        *name == self.key || self.cols[j].base == TEMPORAL_COLUMN || self.drift.as_deref() == Some(name.as_str())
    }

    fn sample_date(&self, rng: &mut impl Rng, max_ts: i64) -> CellValue {
        CellValue::Timestamp(max_ts - rng.gen_range(0..365) * DAY)
    }

    fn new_name(&self, j: usize, taken: &HashSet<String>) -> String {
        let c = &self.cols[j];
        c.synonyms
            .iter()
            .map(|s| s.to_string())
            .chain((2..).map(|n| format!("{}_{n}", c.base)))
            .find(|n| !taken.contains(n) && *n != c.name)
            .expect("unbounded candidates")
    }

    /// Samples one lineage step, returning the next version and its log.
    fn step(
        &mut self,
        rng: &mut ChaCha8Rng,
        config: &FamilyConfig,
        names: &mut Names,
        family_id: &str,
        from_ordinal: u32,
        next_id: String,
    ) -> Result<(Table, ChangeLog), SynthError> {
        let src = self.table.clone();
        let n_rows = src.row_count();
        let n_cols = src.arity();
        let key_src = src.column_index(&self.key).expect("key column present");

        let mut renames: BTreeMap<usize, String> = BTreeMap::new();
        let mut drops: BTreeSet<usize> = BTreeSet::new();
        let mut transforms: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        let mut new_cols: Vec<ColState> = Vec::new();
        let mut deletes: BTreeSet<usize> = BTreeSet::new();
        let mut add_rows = 0usize;
        let mut updates: BTreeMap<(usize, usize), CellValue> = BTreeMap::new();
        let mut taken: HashSet<String> = src.headers().iter().cloned().collect();

        let touched = |j: usize,
                       renames: &BTreeMap<usize, String>,
                       drops: &BTreeSet<usize>,
                       transforms: &BTreeMap<usize, (f64, f64)>| {
            renames.contains_key(&j) || drops.contains(&j) || transforms.contains_key(&j)
        };

        let n_ops = rng.gen_range(config.ops_per_step.0..=config.ops_per_step.1);
        for _ in 0..n_ops {
            match config.op_mix.sample(rng) {
                OpKind::UpdateCell => {
                    let cands: Vec<usize> = (0..n_cols)
                        .filter(|&j| !self.is_protected(j) && !drops.contains(&j) && !transforms.contains_key(&j))
                        .collect();
                    let rows: Vec<usize> = (0..n_rows).filter(|i| !deletes.contains(i)).collect();
                    if let (Some(&j), Some(&i)) = (cands.choose(rng), rows.choose(rng)) {
                        let gen = self.cols[j].gen.expect("generated column");
                        let old = &src.rows()[i][j];
                        for _ in 0..8 {
                            let v = gen.sample(rng);
                            if &v != old && !updates.contains_key(&(i, j)) {
                                updates.insert((i, j), v);
                                break;
                            }
                        }
                    }
                }
                OpKind::AddRow => add_rows += 1,
                OpKind::DeleteRow => {
                    let live = n_rows - deletes.len();
                    let rows: Vec<usize> = (0..n_rows)
                        .filter(|i| !deletes.contains(i) && !updates.keys().any(|(r, _)| r == i))
                        .collect();
                    if live > 6 {
                        if let Some(&i) = rows.choose(rng) {
                            deletes.insert(i);
                        }
                    }
                }
                OpKind::AddColumn => {
                    let present: HashSet<&str> = self
                        .cols
                        .iter()
                        .map(|c| c.base)
                        .chain(new_cols.iter().map(|c| c.base))
                        .collect();
                    let cands: Vec<&ColumnSpec> = self
                        .template
                        .columns
                        .iter()
                        .filter(|c| !present.contains(c.name) && !taken.contains(c.name))
                        .collect();
                    if let Some(spec) = cands.choose(rng) {
                        taken.insert(spec.name.to_string());
                        new_cols.push(ColState {
                            name: spec.name.to_string(),
                            base: spec.name,
                            gen: Some(spec.gen),
                            synonyms: spec.synonyms,
                            renames: 0,
                        });
                    }
                }
                OpKind::DropColumn => {
                    let cands: Vec<usize> = (0..n_cols)
                        .filter(|&j| {
                            !self.is_protected(j)
                                && !touched(j, &renames, &drops, &transforms)
                                && !updates.keys().any(|(_, c)| *c == j)
                        })
                        .collect();
                    if n_cols - drops.len() + new_cols.len() > 3 {
                        if let Some(&j) = cands.choose(rng) {
                            drops.insert(j);
                        }
                    }
                }
                OpKind::RenameColumn => {
                    let cands: Vec<usize> = (0..n_cols)
                        .filter(|&j| !self.is_protected(j) && !touched(j, &renames, &drops, &transforms))
                        .collect();
                    if let Some(&j) = cands.choose(rng) {
                        let name = self.new_name(j, &taken);
                        taken.insert(name.clone());
                        renames.insert(j, name);
                    }
                }
                OpKind::Affine => {
                    if let Some((j, ab)) = self.pick_affine(rng, &src, &renames, &drops, &transforms, &updates, false) {
                        transforms.insert(j, ab);
                    }
                }
                OpKind::Noop => {}
            }
        }
        if config.semantic_drift {
            if let Some((j, ab)) = self.pick_affine(rng, &src, &renames, &drops, &transforms, &updates, true) {
                transforms.insert(j, ab);
            }
        }
        if let Some(d) = &self.drift {
            let j = src.column_index(d).expect("drift column present");
            transforms.insert(j, (1.0, rng.gen_range(1..=2) as f64));
        }
        let mut max_ts = self.max_ts;
        if self.temporal {
            let j = self
                .cols
                .iter()
                .position(|c| c.base == TEMPORAL_COLUMN)
                .expect("temporal column");
            let rows: Vec<usize> = (0..n_rows).filter(|i| !deletes.contains(i)).collect();
            let &i = rows.choose(rng).expect("survivors");
            max_ts += rng.gen_range(1..=30) * DAY;
            updates.insert((i, j), CellValue::Timestamp(max_ts));
        }

        // Target column layout.
        let mut layout: Vec<(Origin, ColState)> = (0..n_cols)
            .filter(|j| !drops.contains(j))
            .map(|j| {
                let mut c = self.cols[j].clone();
                if let Some(n) = renames.get(&j) {
                    c.name = n.clone();
                    c.renames += 1;
                }
                (Origin::Source(j), c)
            })
            .collect();
        for (k, c) in new_cols.iter().enumerate() {
            let pos = rng.gen_range(0..=layout.len());
            layout.insert(pos, (Origin::New(k), c.clone()));
        }
        let types: Vec<ColType> = layout
            .iter()
            .map(|(o, c)| match o {
                Origin::Source(j) => src.col_types()[*j],
                Origin::New(_) => c.gen.expect("generated column").col_type(),
            })
            .collect();

        // Surviving rows, then inserted rows.
        let mut new_values: Vec<Vec<CellValue>> = vec![Vec::new(); new_cols.len()];
        let mut rows: Vec<(Option<usize>, Vec<CellValue>)> = Vec::new();
        for i in (0..n_rows).filter(|i| !deletes.contains(i)) {
            let row = layout
                .iter()
                .zip(&types)
                .map(|((o, c), ty)| match o {
                    Origin::Source(j) => {
                        let v = src.rows()[i][*j].clone();
                        if let Some(u) = updates.get(&(i, *j)) {
                            u.clone()
                        } else if let Some((a, b)) = transforms.get(j) {
                            affine_image(&v, *ty, *a, *b).expect("transform keeps values representable")
                        } else {
                            v
                        }
                    }
                    Origin::New(k) => {
                        let v = c.gen.expect("generated column").sample(rng);
                        new_values[*k].push(v.clone());
                        v
                    }
                })
                .collect();
            rows.push((Some(i), row));
        }
        let mut added_keys = Vec::new();
        for _ in 0..add_rows {
            let name = names.fresh(self.template.kind, rng);
            let row: Vec<CellValue> = layout
                .iter()
                .map(|(_, c)| match (c.gen, c.base) {
                    (Some(g), _) => g.sample(rng),
                    (None, TEMPORAL_COLUMN) => self.sample_date(rng, max_ts),
                    (None, _) => CellValue::Text(name.clone()),
                })
                .collect();
            let pos = rng.gen_range(0..=rows.len());
            rows.insert(pos, (None, row));
            added_keys.push(CellValue::Text(name));
        }

        // Record the ops.
        let key_cell = |i: usize| src.rows()[i][key_src].clone();
        let tgt_key = layout
            .iter()
            .position(|(o, _)| matches!(o, Origin::Source(j) if *j == key_src))
            .expect("key survives");
        let mut ops = Vec::new();
        for (&j, n) in &renames {
            ops.push(ChangeOp::RenameColumn {
                old_name: src.headers()[j].clone(),
                new_name: n.clone(),
            });
        }
        for &j in &drops {
            ops.push(ChangeOp::DropColumn {
                name: src.headers()[j].clone(),
                position: j,
                col_type: src.col_types()[j],
                saved: (0..n_rows)
                    .filter(|&i| !src.rows()[i][j].is_null())
                    .map(|i| (key_cell(i), src.rows()[i][j].clone()))
                    .collect(),
            });
        }
        for (pos, (o, c)) in layout.iter().enumerate() {
            if let Origin::New(k) = o {
                let survivors = rows.iter().filter_map(|(src_i, _)| *src_i);
                ops.push(ChangeOp::AddColumn {
                    name: c.name.clone(),
                    position: pos,
                    col_type: types[pos],
                    values: survivors
                        .zip(&new_values[*k])
                        .map(|(i, v)| (key_cell(i), v.clone()))
                        .collect(),
                });
            }
        }
        for (&j, &(a, b)) in &transforms {
            let ty = src.col_types()[j];
            let pos = layout
                .iter()
                .position(|(o, _)| matches!(o, Origin::Source(s) if *s == j))
                .unwrap();
            let pairs: Vec<_> = rows
                .iter()
                .filter_map(|(src_i, row)| src_i.map(|i| (key_cell(i), src.rows()[i][j].clone(), row[pos].clone())))
                .collect();
            ops.push(ChangeOp::affine(
                layout[pos].1.name.clone(),
                a,
                b,
                affine_restore_list(ty, a, b, &pairs),
            ));
        }
        for &i in &deletes {
            ops.push(ChangeOp::DeleteRow {
                key: key_cell(i),
                position: i,
                row: src.rows()[i].clone(),
            });
        }
        for (pos, (src_i, row)) in rows.iter().enumerate() {
            if src_i.is_none() {
                ops.push(ChangeOp::AddRow {
                    key: row[tgt_key].clone(),
                    position: pos,
                    row: row.clone(),
                });
            }
        }
        for (&(i, j), new) in &updates {
            let pos = layout
                .iter()
                .position(|(o, _)| matches!(o, Origin::Source(s) if *s == j))
                .unwrap();
            ops.push(ChangeOp::UpdateCell {
                key: key_cell(i),
                column: layout[pos].1.name.clone(),
                old: src.rows()[i][j].clone(),
                new: new.clone(),
            });
        }

        let headers: Vec<String> = layout.iter().map(|(_, c)| c.name.clone()).collect();
        let next = Table::new(next_id, headers, types, rows.into_iter().map(|(_, r)| r).collect())?;
        let log = ChangeLog::new(
            family_id,
            from_ordinal,
            Some(KeyColumns {
                from: self.key.clone(),
                to: self.key.clone(),
            }),
            ops,
        );
        self.table = next.clone();
        self.cols = layout.into_iter().map(|(_, c)| c).collect();
        self.max_ts = max_ts;
        Ok((next, log))
    }

    #[allow(clippy::too_many_arguments)]
    fn pick_affine(
        &self,
        rng: &mut impl Rng,
        src: &Table,
        renames: &BTreeMap<usize, String>,
        drops: &BTreeSet<usize>,
        transforms: &BTreeMap<usize, (f64, f64)>,
        updates: &BTreeMap<(usize, usize), CellValue>,
        rescale: bool,
    ) -> Option<(usize, (f64, f64))> {
        let cands: Vec<usize> = (0..src.arity())
            .filter(|&j| {
                src.col_types()[j].is_numeric()
                    && !self.is_protected(j)
                    && !renames.contains_key(&j)
                    && !drops.contains(&j)
                    && !transforms.contains_key(&j)
                    && !updates.keys().any(|(_, c)| *c == j)
            })
            .collect();
        let &j = cands.choose(rng)?;
        let coeffs = match (src.col_types()[j], rescale) {
            (ColType::Integer, false) => (*[2.0, 3.0, -1.0, -2.0].choose(rng)?, rng.gen_range(-5..=5) as f64),
            (ColType::Integer, true) => (*[2.0, 10.0].choose(rng)?, 0.0),
            (_, false) => (
                *[2.0, 0.5, 1.5, -1.0, 0.25].choose(rng)?,
                *[0.0, 1.0, -0.5, 2.5].choose(rng)?,
            ),
            (_, true) => (*[2.5, 0.4, 10.0].choose(rng)?, 0.0),
        };
        // Keep integers well inside the exact range.
        if src.col_types()[j] == ColType::Integer {
            let big = src.column(j).filter_map(CellValue::as_f64).any(|v| v.abs() > 1e12);
            if big {
                return None;
            }
        }
        Some((j, coeffs))
    }
}

fn build_family(
    rng: &mut ChaCha8Rng,
    config: &FamilyConfig,
    template: &'static Template,
    names: &mut Names,
    ids: &mut Ids,
    family_id: String,
    reuse_rate: f64,
) -> Result<FamilyGroundTruth, SynthError> {
    let n_entities = rng.gen_range(config.entities.0..=config.entities.1);
    let n_versions = rng.gen_range(config.versions.0..=config.versions.1);
    let reuse = (reuse_rate * n_entities as f64).round() as usize;
    let entities = names.draw(template.kind, n_entities, reuse, rng);
    let id = ids.next(rng);
    let (table, cols, max_ts) = base_table(rng, template, &entities, config.temporal, config.drift, id)?;
    names.publish(template.kind, &entities);

    let drift = config
        .drift
        .then(|| template.drift.as_ref().map(|d| d.name.to_string()))
        .flatten();
    let mut state = FamilyState {
        template,
        table: table.clone(),
        cols,
        key: template.entity.to_string(),
        temporal: config.temporal,
        drift: drift.clone(),
        semantic_drift: config.semantic_drift,
        max_ts,
    };
    let _ = state.semantic_drift;
    let mut versions = vec![table];
    let mut logs = Vec::new();
    for k in 0..n_versions - 1 {
        let id = ids.next(rng);
        let (next, log) = state.step(rng, config, names, &family_id, k as u32, id)?;
        versions.push(next);
        logs.push(log);
    }
    Ok(FamilyGroundTruth {
        family_id,
        versions,
        true_logs: logs,
        drift_columns: drift.into_iter().collect(),
        temporal_column: config.temporal.then(|| TEMPORAL_COLUMN.to_string()),
    })
}

/// Generates one family from its own vocabulary.
pub fn generate_family(config: &FamilyConfig, seed: u64) -> Result<FamilyGroundTruth, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = FAMILY_TEMPLATES.choose(&mut rng).expect("templates");
    build_family(
        &mut rng,
        config,
        template,
        &mut Names::default(),
        &mut Ids::default(),
        "gt000".into(),
        0.0,
    )
}

/// Generates a lake of independent families plus singleton distractors.
pub fn generate_lake(config: &LakeConfig, seed: u64) -> Result<SyntheticLake, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = Names::default();
    let mut ids = Ids::default();
    let mut families = Vec::with_capacity(config.families);
    for f in 0..config.families {
        let template = FAMILY_TEMPLATES.choose(&mut rng).expect("templates");
        let family_config = FamilyConfig {
            temporal: rng.gen_bool(config.temporal_rate),
            drift: rng.gen_bool(config.drift_rate),
            ..config.family.clone()
        };
        let reuse = if f == 0 { 0.0 } else { config.shared_vocab_rate };
        families.push(build_family(
            &mut rng,
            &family_config,
            template,
            &mut names,
            &mut ids,
            format!("gt{f:03}"),
            reuse,
        )?);
    }
    let on_family_schema = (config.shared_vocab_rate * config.distractors as f64).round() as usize;
    let mut distractors = Vec::with_capacity(config.distractors);
    for d in 0..config.distractors {
        let shared = d < on_family_schema;
        let template = if shared {
            FAMILY_TEMPLATES.choose(&mut rng)
        } else {
            DISTRACTOR_TEMPLATES.choose(&mut rng)
        }
        .expect("templates");
        let n = rng.gen_range(config.family.entities.0..=config.family.entities.1);
        let reuse = if shared {
            (config.shared_vocab_rate * n as f64).round() as usize
        } else {
            0
        };
        let entities = names.draw(template.kind, n, reuse, &mut rng);
        let temporal = rng.gen_bool(config.temporal_rate);
        let drift = shared && rng.gen_bool(config.drift_rate);
        let id = ids.next(&mut rng);
        let (table, _, _) = base_table(&mut rng, template, &entities, temporal, drift, id)?;
        distractors.push(table);
    }
    Ok(SyntheticLake {
        families,
        distractors,
        generator_seed: seed,
    })
}
