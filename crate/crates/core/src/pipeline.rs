// SPDX-License-Identifier: Apache-2.0

//! Offline phase: families, lineage, change logs, representatives, index.

use std::collections::HashMap;

use log::info;
use rayon::prelude::*;
use thiserror::Error;

use crate::change::ChangeLog;
use crate::family::{build_representative, cluster_families, FamilyError, RepresentativeTable, VersionFamily, Weights};
use crate::index::{build_index, AnchorPolicy, IndexError, TemporalIndex};
use crate::lineage::{infer_lineage, synthesize_changelog, Lineage, LineageError};
use crate::table::Table;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("duplicate table id `{0}`")]
    DuplicateTable(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Lineage(#[from] LineageError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineConfig {
    pub weights: Weights,
    pub threshold: f64,
    pub policy: AnchorPolicy,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig {
            weights: Weights::DEFAULT,
            threshold: crate::family::DEFAULT_THRESHOLD,
            policy: AnchorPolicy::Latest,
        }
    }
}

pub struct OfflineOutput {
    pub families: Vec<VersionFamily>,
    pub lineages: Vec<Lineage>,
    pub logs: Vec<ChangeLog>,
    pub representatives: Vec<RepresentativeTable>,
    pub index: TemporalIndex,
}

struct FamilyArtifacts {
    lineage: Lineage,
    logs: Vec<ChangeLog>,
    representative: RepresentativeTable,
}

fn process_family(fam: &VersionFamily, by_id: &HashMap<&str, &Table>) -> Result<FamilyArtifacts, PipelineError> {
    let members: Vec<&Table> = fam.member_table_ids.iter().map(|id| by_id[id.as_str()]).collect();
    let lineage = infer_lineage(&fam.family_id, &members);
    let ordered: Vec<&Table> = lineage.order.iter().map(|id| by_id[id.as_str()]).collect();
    let logs = ordered
        .windows(2)
        .enumerate()
        .map(|(k, w)| synthesize_changelog(w[0], w[1], &fam.family_id, k as u32))
        .collect::<Result<Vec<_>, _>>()?;
    let representative = build_representative(&fam.family_id, &ordered)?;
    Ok(FamilyArtifacts {
        lineage,
        logs,
        representative,
    })
}

pub fn run_offline(tables: &[Table], config: &OfflineConfig) -> Result<OfflineOutput, PipelineError> {
    let mut by_id: HashMap<&str, &Table> = HashMap::with_capacity(tables.len());
    for t in tables {
        if by_id.insert(&t.table_id, t).is_some() {
            return Err(PipelineError::DuplicateTable(t.table_id.clone()));
        }
    }
    let families = cluster_families(tables, &config.weights, config.threshold);
    info!("{} tables form {} families", tables.len(), families.len());
    let artifacts = families
        .par_iter()
        .map(|f| process_family(f, &by_id))
        .collect::<Result<Vec<_>, _>>()?;
    let mut lineages = Vec::with_capacity(artifacts.len());
    let mut logs = Vec::new();
    let mut representatives = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        lineages.push(a.lineage);
        logs.extend(a.logs);
        representatives.push(a.representative);
    }
    info!("synthesized {} change logs", logs.len());
    let index = build_index(tables, &families, &lineages, &logs, &representatives, config.policy)?;
    Ok(OfflineOutput {
        families,
        lineages,
        logs,
        representatives,
        index,
    })
}
