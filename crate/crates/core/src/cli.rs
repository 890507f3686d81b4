// SPDX-License-Identifier: Apache-2.0

//! Command-line entry point. Exit status: 0 success, 1 user error, 2
//! internal error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::LevelFilter;

use crate::change::{write_log, ChangeError};
use crate::family::{
    labeled_pairs, pairwise_f1, parse_weights, train_weights, write_weights, Weights, DEFAULT_THRESHOLD,
};
use crate::index::{AnchorPolicy, IndexError, TemporalIndex, VersionCache, DEFAULT_CACHE_CAPACITY};
use crate::lineage::LineageError;
use crate::pipeline::{run_offline, OfflineConfig, PipelineError};
use crate::query::{parse_query, write_answer, Engine};
use crate::synth::{generate_lake, parse_config, read_manifest, write_lake, LakeConfig, MANIFEST_FILE};
use crate::table::Table;

/// `println!` that returns write errors instead of panicking on them.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*)?
    };
}

pub const INDEX_ENV: &str = "TEMPOLAKE_INDEX";
const DEFAULT_SYNTH_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "tempolake", version, about = "Version-aware table discovery over data lakes")]
struct Cli {
    /// Index directory.
    #[arg(long, global = true, env = INDEX_ENV, default_value = "tempolake-index")]
    index: PathBuf,
    /// Seed for every random choice (synth: 42, train: the default weights' seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic lake with its ground truth.
    Synth {
        /// Output lake directory.
        #[arg(long)]
        out: PathBuf,
        /// Generator config (key = value).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's family count.
        #[arg(long)]
        families: Option<usize>,
        /// Overrides the config's distractor count.
        #[arg(long)]
        distractors: Option<usize>,
    },
    /// Load and validate every CSV in a lake directory.
    Ingest {
        /// Lake directory of CSV files.
        #[arg(long)]
        lake: PathBuf,
    },
    /// Fit pair-scoring weights on a synthetic lake.
    Train {
        /// Output weights file.
        #[arg(long)]
        out: PathBuf,
        /// Generator config for the training lake.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the offline phase over a lake and persist the index.
    Index {
        /// Lake directory of CSV files.
        #[arg(long)]
        lake: PathBuf,
        /// Weights file from `train`; defaults to the built-in weights.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Pair-score threshold for joining families.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        theta: f64,
        /// latest, earliest, all or every:N.
        #[arg(long, default_value = "latest")]
        anchor_policy: AnchorPolicy,
    },
    /// Print the family manifest.
    Families,
    /// Print each family's version order and evidence.
    Lineage {
        /// Only this family.
        #[arg(long)]
        family: Option<String>,
    },
    /// Print a family's change logs in wire format.
    Explain {
        /// Family id.
        #[arg(long)]
        family: String,
        /// Only the log starting at this ordinal.
        #[arg(long)]
        step: Option<u32>,
    },
    /// Answer a query file.
    Query {
        /// Query file (key = value lines).
        file: PathBuf,
        /// Directory for result tables and metadata.
        #[arg(long, default_value = "query-results")]
        out: PathBuf,
        /// Maximum number of results.
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Versions kept in the reconstruction cache.
        #[arg(long, default_value_t = DEFAULT_CACHE_CAPACITY)]
        cache_capacity: usize,
    },
    /// Reconstruct one version and write it as CSV.
    Travel {
        /// Family id.
        #[arg(long)]
        family: String,
        /// Version ordinal (0 is the oldest).
        #[arg(long)]
        ordinal: u32,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print index sizes and reconstruction counters.
    Stats,
}

/// Settings shared by the offline and online phases.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub lake_dir: PathBuf,
    pub index_dir: PathBuf,
    pub weights_path: Option<PathBuf>,
    pub theta: f64,
    pub cache_capacity: usize,
    pub anchor_policy: AnchorPolicy,
    pub generator_config: Option<PathBuf>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            lake_dir: PathBuf::from("lake"),
            index_dir: PathBuf::from("tempolake-index"),
            weights_path: None,
            theta: DEFAULT_THRESHOLD,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            anchor_policy: AnchorPolicy::Latest,
            generator_config: None,
            seed: DEFAULT_SYNTH_SEED,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = |p: &Path| p.as_os_str().is_empty();
        if empty(&self.lake_dir) || empty(&self.index_dir) {
            bail!("paths must not be empty");
        }
        if self.weights_path.as_deref().is_some_and(empty) || self.generator_config.as_deref().is_some_and(empty) {
            bail!("paths must not be empty");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            bail!("theta must lie strictly between 0 and 1, got {}", self.theta);
        }
        if self.cache_capacity == 0 {
            bail!("cache capacity must be at least 1");
        }
        Ok(())
    }
}

/// Loads every `*.csv` directly inside `dir`, ids from file stems.
pub fn load_lake(dir: &Path) -> Result<Vec<Table>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read lake directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let bytes = fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
            Table::from_csv(id, &bytes).with_context(|| format!("in {}", p.display()))
        })
        .collect()
}

fn lake_config(path: Option<&Path>) -> Result<LakeConfig> {
    match path {
        None => Ok(LakeConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

fn open_index(dir: &Path) -> Result<TemporalIndex> {
    TemporalIndex::load(dir).with_context(|| format!("cannot open index {}", dir.display()))
}

fn cmd_synth(cfg: &EngineConfig, out: &Path, families: Option<usize>, distractors: Option<usize>) -> Result<()> {
    let mut lc = lake_config(cfg.generator_config.as_deref())?;
    lc.families = families.unwrap_or(lc.families);
    lc.distractors = distractors.unwrap_or(lc.distractors);
    let lake = generate_lake(&lc, cfg.seed)?;
    write_lake(&lake, out).with_context(|| format!("cannot write lake to {}", out.display()))?;
    let versions: usize = lake.families.iter().map(|f| f.versions.len()).sum();
    out!(
        "wrote {} families ({versions} versions) and {} distractors to {} (seed {})",
        lake.families.len(),
        lake.distractors.len(),
        out.display(),
        cfg.seed
    );
    Ok(())
}

fn cmd_ingest(cfg: &EngineConfig) -> Result<()> {
    let tables = load_lake(&cfg.lake_dir)?;
    let rows: usize = tables.iter().map(Table::row_count).sum();
    out!("{} tables, {rows} rows", tables.len());
    for t in &tables {
        let cols: Vec<String> = t
            .headers()
            .iter()
            .zip(t.col_types())
            .map(|(h, ty)| format!("{h}:{ty}"))
            .collect();
        out!("{}\t{} rows\t{}", t.table_id, t.row_count(), cols.join(","));
    }
    if cfg.lake_dir.join(MANIFEST_FILE).is_file() {
        let m = read_manifest(&cfg.lake_dir)?;
        let ids: std::collections::HashSet<&str> = tables.iter().map(|t| t.table_id.as_str()).collect();
        let listed = m.families.iter().flat_map(|f| f.table_ids.iter()).chain(&m.distractors);
        let missing: Vec<&String> = listed.filter(|id| !ids.contains(id.as_str())).collect();
        if !missing.is_empty() {
            bail!(
                "ground truth lists {} tables missing from the lake, e.g. {}",
                missing.len(),
                missing[0]
            );
        }
        out!(
            "ground truth: {} families, {} distractors",
            m.families.len(),
            m.distractors.len()
        );
    }
    Ok(())
}

fn cmd_train(cfg: &EngineConfig, out: &Path) -> Result<()> {
    let lake = generate_lake(&lake_config(cfg.generator_config.as_deref())?, cfg.seed)?;
    let examples = labeled_pairs(&lake, cfg.seed);
    let outcome = train_weights(&examples)?;
    fs::write(out, write_weights(&outcome.weights, cfg.seed))
        .with_context(|| format!("cannot write {}", out.display()))?;
    out!(
        "trained on {} pairs (seed {}): loss {:.6}, weights in {}",
        examples.len(),
        cfg.seed,
        outcome.loss,
        out.display()
    );
    Ok(())
}

fn cmd_index(cfg: &EngineConfig) -> Result<()> {
    let weights = match &cfg.weights_path {
        None => Weights::DEFAULT,
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            parse_weights(&text).with_context(|| format!("in {}", p.display()))?.0
        }
    };
    let tables = load_lake(&cfg.lake_dir)?;
    let out = run_offline(
        &tables,
        &OfflineConfig {
            weights,
            threshold: cfg.theta,
            policy: cfg.anchor_policy,
        },
    )?;
    let dir = &cfg.index_dir;
    if dir.exists() {
        if dir.join("MANIFEST").is_file() {
            fs::remove_dir_all(dir).with_context(|| format!("cannot replace index {}", dir.display()))?;
        } else if fs::read_dir(dir)?.next().is_some() {
            bail!("{} exists and is not an index; refusing to overwrite it", dir.display());
        }
    }
    out.index.save(dir)?;
    out!(
        "{} tables -> {} families, {} change logs; index at {}",
        tables.len(),
        out.families.len(),
        out.logs.len(),
        dir.display()
    );
    if cfg.lake_dir.join(MANIFEST_FILE).is_file() {
        let m = read_manifest(&cfg.lake_dir)?;
        let mut labels = std::collections::HashMap::new();
        for f in &m.families {
            for id in &f.table_ids {
                labels.insert(id.as_str(), Some(f.family_id.as_str()));
            }
        }
        for id in &m.distractors {
            labels.insert(id.as_str(), None);
        }
        let s = pairwise_f1(&out.families, &labels);
        out!(
            "against ground truth: precision {:.4}, recall {:.4}, F1 {:.4}",
            s.precision,
            s.recall,
            s.f1
        );
    }
    print_storage(&out.index)
}

fn print_storage(index: &TemporalIndex) -> Result<()> {
    let s = index.storage_stats()?;
    out!(
        "{} families, {} versions, {} anchors ({} policy)",
        s.families,
        s.versions,
        s.anchors,
        index.policy()
    );
    out!(
        "anchor layout {} bytes (anchors {}, logs {}); full materialization {} bytes",
        s.anchor_layout_bytes(),
        s.anchor_bytes,
        s.log_bytes,
        s.full_bytes
    );
    let verdict = if s.anchor_layout_bytes() <= s.full_bytes {
        "<="
    } else {
        ">"
    };
    out!("anchor layout {verdict} full materialization");
    let c = s.counters;
    out!(
        "reconstructing every version: cold_reads {}, log_reads {}, hits {}, reconstructions {}",
        c.cold_reads,
        c.log_reads,
        c.hits,
        c.reconstructions
    );
    Ok(())
}

fn cmd_families(index: &TemporalIndex) -> Result<()> {
    for fid in index.family_ids() {
        let ids: Vec<&str> = index.chain(fid)?.iter().map(|d| d.table_id.as_str()).collect();
        out!("{fid}\t{}", ids.join(","));
    }
    Ok(())
}

fn cmd_lineage(index: &TemporalIndex, family: Option<&str>) -> Result<()> {
    let fams: Vec<&str> = match family {
        Some(f) => vec![f],
        None => index.family_ids().collect(),
    };
    for fid in fams {
        let lin = index.lineage(fid)?;
        let chain = index.chain(fid)?;
        out!("{fid}");
        for (k, d) in chain.iter().enumerate() {
            let anchor = if d.anchor { " [anchor]" } else { "" };
            match k.checked_sub(1).and_then(|i| lin.evidence.get(i)) {
                Some(e) => out!("  {k}\t{}\t{} {:.3}{anchor}", d.table_id, e.signal, e.confidence),
                None => out!("  {k}\t{}{anchor}", d.table_id),
            }
        }
    }
    Ok(())
}

fn cmd_explain(index: &TemporalIndex, family: &str, step: Option<u32>) -> Result<()> {
    let n = index.chain(family)?.len() as u32;
    let steps: Vec<u32> = match step {
        Some(s) if s + 1 >= n => bail!("family {family} has no step from ordinal {s}"),
        Some(s) => vec![s],
        None => (0..n.saturating_sub(1)).collect(),
    };
    for k in steps {
        write!(io::stdout(), "{}", write_log(&index.log(family, k)?))?;
    }
    Ok(())
}

fn cmd_query(cfg: &EngineConfig, file: &Path, out: &Path, top_k: usize) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let base = file.parent().unwrap_or(Path::new("."));
    let q = parse_query(&text, base).with_context(|| format!("in {}", file.display()))?;
    let engine = Engine::new(open_index(&cfg.index_dir)?, cfg.cache_capacity);
    let answer = engine.answer(&q, top_k)?;
    let files = write_answer(&answer, out)?;
    if answer.results.is_empty() {
        out!("no matching family");
    }
    for (r, path) in answer.results.iter().zip(&files) {
        let stat = r.evidence.statistic.map_or(String::new(), |s| format!(" ({s:.4})"));
        out!(
            "{}\tversion {}\t{}\tscore {:.4}\t{}{stat}\t{}",
            r.family_id,
            r.ordinal,
            r.table_id,
            r.discovery_score,
            r.evidence.clause,
            path.display()
        );
    }
    for f in &answer.failures {
        eprintln!("{}: {}", f.family_id, f.error);
    }
    let c = engine.cache.counters();
    out!(
        "cold_reads {}, log_reads {}, hits {}, reconstructions {}",
        c.cold_reads,
        c.log_reads,
        c.hits,
        c.reconstructions
    );
    Ok(())
}

fn cmd_travel(cfg: &EngineConfig, family: &str, ordinal: u32, out: &Path) -> Result<()> {
    let index = open_index(&cfg.index_dir)?;
    let cache = VersionCache::new(cfg.cache_capacity);
    let t = index.fetch_version(&cache, family, ordinal)?;
    fs::write(out, t.to_csv()).with_context(|| format!("cannot write {}", out.display()))?;
    let c = cache.counters();
    out!(
        "{family} version {ordinal} ({}) -> {}; cold_reads {}, log_reads {}",
        t.table_id,
        out.display(),
        c.cold_reads,
        c.log_reads
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = EngineConfig {
        index_dir: cli.index,
        seed: cli.seed.unwrap_or(DEFAULT_SYNTH_SEED),
        ..EngineConfig::default()
    };
    match cli.command {
        Command::Synth {
            out,
            config,
            families,
            distractors,
        } => {
            cfg.generator_config = config;
            cfg.validate()?;
            cmd_synth(&cfg, &out, families, distractors)
        }
        Command::Ingest { lake } => {
            cfg.lake_dir = lake;
            cfg.validate()?;
            cmd_ingest(&cfg)
        }
        Command::Train { out, config } => {
            cfg.generator_config = config;
            cfg.seed = cli.seed.unwrap_or(Weights::DEFAULT_SEED);
            cfg.validate()?;
            cmd_train(&cfg, &out)
        }
        Command::Index {
            lake,
            weights,
            theta,
            anchor_policy,
        } => {
            cfg.lake_dir = lake;
            cfg.weights_path = weights;
            cfg.theta = theta;
            cfg.anchor_policy = anchor_policy;
            cfg.validate()?;
            cmd_index(&cfg)
        }
        Command::Families => cmd_families(&open_index(&cfg.index_dir)?),
        Command::Lineage { family } => cmd_lineage(&open_index(&cfg.index_dir)?, family.as_deref()),
        Command::Explain { family, step } => cmd_explain(&open_index(&cfg.index_dir)?, &family, step),
        Command::Query {
            file,
            out,
            top_k,
            cache_capacity,
        } => {
            cfg.cache_capacity = cache_capacity;
            cfg.validate()?;
            cmd_query(&cfg, &file, &out, top_k)
        }
        Command::Travel { family, ordinal, out } => {
            cfg.validate()?;
            cmd_travel(&cfg, &family, ordinal, &out)
        }
        Command::Stats => {
            let index = open_index(&cfg.index_dir)?;
            out!("index {}: {} change logs", cfg.index_dir.display(), index.log_count());
            print_storage(&index)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

/// Faults in our own data or algorithms, as opposed to bad input.
fn is_internal(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<IndexError>(),
            Some(IndexError::Corrupt(_) | IndexError::Change(_))
        ) || matches!(c.downcast_ref::<LineageError>(), Some(LineageError::Synthesis { .. }))
            || matches!(
                c.downcast_ref::<PipelineError>(),
                Some(PipelineError::Lineage(LineageError::Synthesis { .. }))
            )
            || c.downcast_ref::<ChangeError>().is_some()
    })
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(e) if is_broken_pipe(&e) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_internal(&e) {
                2
            } else {
                1
            }
        }
    }
}
