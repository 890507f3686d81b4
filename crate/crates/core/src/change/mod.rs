// SPDX-License-Identifier: Apache-2.0

//! Invertible change operators and per-step change logs.
//!
//! Rows are addressed by identity: the value of the log's key column when it
//! has one, otherwise a content hash of the whole row (see
//! [`row_identities`]). Row identities are computed once, on the table the
//! log is applied to, before any op runs.
//!
//! Applying a log runs the ops group by group in canonical order. Column
//! structure (renames, drops, adds) is one phase: drops remove columns by
//! name, then adds are inserted at their target positions in ascending
//! order. Row deletions are resolved against the input table and row
//! insertions land at their target positions, again in ascending order.

mod apply;
mod wire;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{CellValue, ColType};

pub use self::apply::{affine_image, affine_inverse, affine_restore_list, apply_log, row_identities};
pub use self::wire::{parse_log, write_log};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChangeError {
    #[error("conflict in {op}: {reason}")]
    Conflict { op: String, reason: String },
    #[error("stale log at {op}: {reason}")]
    Stale { op: String, reason: String },
    #[error("invalid change log: {0}")]
    Invalid(String),
    #[error("malformed change log at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A keyed cell value, used for column payloads.
pub type KeyedValue = (CellValue, CellValue);

/// Exact pre- and post-image of one cell that the affine map alone would not
/// reproduce bit-for-bit in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRestore {
    pub key: CellValue,
    pub pre: CellValue,
    pub post: CellValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChangeOp {
    RenameColumn {
        old_name: String,
        new_name: String,
    },
    /// `position` is the column index in the log's output table. `values`
    /// holds the non-Null cells of surviving rows.
    AddColumn {
        name: String,
        position: usize,
        col_type: ColType,
        values: Vec<KeyedValue>,
    },
    /// `position` is the column index in the log's input table.
    DropColumn {
        name: String,
        position: usize,
        col_type: ColType,
        saved: Vec<KeyedValue>,
    },
    /// Maps each non-Null cell `x` of a numeric column to `a * x + b`.
    /// `inv_a`, `inv_b` are the inverse map, fixed when the op is built so
    /// inverting twice gives back the same coefficients.
    TransformColumnAffine {
        name: String,
        a: f64,
        b: f64,
        inv_a: f64,
        inv_b: f64,
        saved: Vec<CellRestore>,
    },
    /// `row` is the full row in the input schema.
    DeleteRow {
        key: CellValue,
        position: usize,
        row: Vec<CellValue>,
    },
    /// `row` is the full row in the output schema.
    AddRow {
        key: CellValue,
        position: usize,
        row: Vec<CellValue>,
    },
    UpdateCell {
        key: CellValue,
        column: String,
        old: CellValue,
        new: CellValue,
    },
}

impl ChangeOp {
    /// Affine op with its inverse coefficients from [`affine_inverse`].
    pub fn affine(name: impl Into<String>, a: f64, b: f64, saved: Vec<CellRestore>) -> ChangeOp {
        let (inv_a, inv_b) = affine_inverse(a, b);
        ChangeOp::TransformColumnAffine {
            name: name.into(),
            a,
            b,
            inv_a,
            inv_b,
            saved,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ChangeOp::RenameColumn { .. } => "RenameColumn",
            ChangeOp::AddColumn { .. } => "AddColumn",
            ChangeOp::DropColumn { .. } => "DropColumn",
            ChangeOp::TransformColumnAffine { .. } => "TransformColumnAffine",
            ChangeOp::DeleteRow { .. } => "DeleteRow",
            ChangeOp::AddRow { .. } => "AddRow",
            ChangeOp::UpdateCell { .. } => "UpdateCell",
        }
    }

    fn group(&self) -> u8 {
        match self {
            ChangeOp::RenameColumn { .. } => 0,
            ChangeOp::AddColumn { .. } => 1,
            ChangeOp::DropColumn { .. } => 2,
            ChangeOp::TransformColumnAffine { .. } => 3,
            ChangeOp::DeleteRow { .. } => 4,
            ChangeOp::AddRow { .. } => 5,
            ChangeOp::UpdateCell { .. } => 6,
        }
    }

    fn sort_column(&self) -> &str {
        match self {
            ChangeOp::RenameColumn { old_name, .. } => old_name,
            ChangeOp::AddColumn { name, .. }
            | ChangeOp::DropColumn { name, .. }
            | ChangeOp::TransformColumnAffine { name, .. } => name,
            ChangeOp::DeleteRow { .. } | ChangeOp::AddRow { .. } => "",
            ChangeOp::UpdateCell { column, .. } => column,
        }
    }

    fn sort_key(&self) -> Option<&CellValue> {
        match self {
            ChangeOp::DeleteRow { key, .. } | ChangeOp::AddRow { key, .. } | ChangeOp::UpdateCell { key, .. } => {
                Some(key)
            }
            _ => None,
        }
    }

    fn canonical_cmp(&self, other: &ChangeOp) -> Ordering {
        self.group()
            .cmp(&other.group())
            .then_with(|| self.sort_column().cmp(other.sort_column()))
            .then_with(|| self.sort_key().cmp(&other.sort_key()))
    }

    /// Short human-readable label used in error messages.
    pub fn describe(&self) -> String {
        match self {
            ChangeOp::RenameColumn { old_name, new_name } => format!("RenameColumn({old_name} -> {new_name})"),
            ChangeOp::AddColumn { name, .. } => format!("AddColumn({name})"),
            ChangeOp::DropColumn { name, .. } => format!("DropColumn({name})"),
            ChangeOp::TransformColumnAffine { name, a, b, .. } => {
                format!("TransformColumnAffine({name}, a={a}, b={b})")
            }
            ChangeOp::DeleteRow { key, .. } => format!("DeleteRow({key})"),
            ChangeOp::AddRow { key, .. } => format!("AddRow({key})"),
            ChangeOp::UpdateCell { key, column, .. } => format!("UpdateCell({key}, {column})"),
        }
    }
}

/// Names of the row-identity column before and after the step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyColumns {
    pub from: String,
    pub to: String,
}

/// The ops turning version `from_ordinal` of a family into `to_ordinal`.
/// Forward logs have `to = from + 1`; inverted logs run the other way.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeLog {
    pub family_id: String,
    pub from_ordinal: u32,
    pub to_ordinal: u32,
    /// `None` means rows are addressed by content hash.
    pub key: Option<KeyColumns>,
    pub ops: Vec<ChangeOp>,
}

impl ChangeLog {
    pub fn new(
        family_id: impl Into<String>,
        from_ordinal: u32,
        key: Option<KeyColumns>,
        ops: Vec<ChangeOp>,
    ) -> ChangeLog {
        let mut log = ChangeLog {
            family_id: family_id.into(),
            from_ordinal,
            to_ordinal: from_ordinal + 1,
            key,
            ops,
        };
        log.canonicalize();
        log
    }

    pub fn is_forward(&self) -> bool {
        self.to_ordinal == self.from_ordinal + 1
    }

    pub fn canonicalize(&mut self) {
        self.ops.sort_by(ChangeOp::canonical_cmp);
    }

    pub fn is_canonical(&self) -> bool {
        self.ops
            .windows(2)
            .all(|w| w[0].canonical_cmp(&w[1]) != Ordering::Greater)
    }

    /// Checks the structural invariants that do not depend on a table.
    pub fn validate(&self) -> Result<(), ChangeError> {
        let invalid = |m: String| Err(ChangeError::Invalid(m));
        if self.from_ordinal.abs_diff(self.to_ordinal) != 1 {
            return invalid(format!(
                "ordinals {} -> {} are not adjacent",
                self.from_ordinal, self.to_ordinal
            ));
        }
        if !self.is_canonical() {
            return invalid("ops are not in canonical order".into());
        }
        let mut rename_sources = HashSet::new();
        let mut rename_targets = HashSet::new();
        let mut structural = HashSet::new();
        let mut transformed = HashSet::new();
        let mut deleted = HashSet::new();
        let mut added = HashSet::new();
        let mut updated = HashSet::new();
        for op in &self.ops {
            match op {
                ChangeOp::RenameColumn { old_name, new_name } => {
                    if old_name == new_name || !rename_sources.insert(old_name) || !rename_targets.insert(new_name) {
                        return invalid(format!("bad rename {old_name} -> {new_name}"));
                    }
                }
                ChangeOp::AddColumn { name, .. } => {
                    if !structural.insert(("add", name)) || rename_targets.contains(name) {
                        return invalid(format!("column {name} added twice or also renamed"));
                    }
                }
                ChangeOp::DropColumn { name, .. } => {
                    if !structural.insert(("drop", name)) || rename_targets.contains(name) {
                        return invalid(format!("column {name} dropped twice or also renamed"));
                    }
                }
                ChangeOp::TransformColumnAffine {
                    name,
                    a,
                    b,
                    inv_a,
                    inv_b,
                    saved,
                } => {
                    if [*a, *b, *inv_a, *inv_b].iter().any(|v| !v.is_finite()) || *a == 0.0 || *inv_a == 0.0 {
                        return invalid(format!("affine transform of {name} has a={a}, b={b}"));
                    }
                    // One direction must be the computed inverse of the other.
                    if affine_inverse(*a, *b) != (*inv_a, *inv_b) && affine_inverse(*inv_a, *inv_b) != (*a, *b) {
                        return invalid(format!("affine transform of {name} has an inconsistent inverse"));
                    }
                    if structural.contains(&("add", name)) || !transformed.insert(name) {
                        return invalid(format!("column {name} transformed twice or added"));
                    }
                    let mut keys = HashSet::new();
                    if !saved.iter().all(|r| keys.insert(&r.key)) {
                        return invalid(format!("duplicate restore key in transform of {name}"));
                    }
                }
                ChangeOp::DeleteRow { key, .. } => {
                    if !deleted.insert(key) {
                        return invalid(format!("row {key} deleted twice"));
                    }
                }
                ChangeOp::AddRow { key, .. } => {
                    if !added.insert(key) {
                        return invalid(format!("row {key} added twice"));
                    }
                }
                ChangeOp::UpdateCell { key, column, old, new } => {
                    if old == new {
                        return invalid(format!("no-op update of ({column}, {key})"));
                    }
                    if transformed.contains(column) || structural.contains(&("add", column)) {
                        return invalid(format!("cell ({column}, {key}) also covered by a column op"));
                    }
                    if added.contains(key) || !updated.insert((column, key)) {
                        return invalid(format!("cell ({column}, {key}) targeted twice"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The log that undoes `log`: applied to the output of `log`, it restores the
/// input exactly.
pub fn invert_log(log: &ChangeLog) -> ChangeLog {
    let renamed_back: BTreeMap<&str, &str> = log
        .ops
        .iter()
        .filter_map(|op| match op {
            ChangeOp::RenameColumn { old_name, new_name } => Some((new_name.as_str(), old_name.as_str())),
            _ => None,
        })
        .collect();
    let back = |name: &String| {
        renamed_back
            .get(name.as_str())
            .map_or_else(|| name.clone(), |s| s.to_string())
    };

    let ops = log
        .ops
        .iter()
        .map(|op| match op.clone() {
            ChangeOp::RenameColumn { old_name, new_name } => ChangeOp::RenameColumn {
                old_name: new_name,
                new_name: old_name,
            },
            ChangeOp::AddColumn {
                name,
                position,
                col_type,
                values,
            } => ChangeOp::DropColumn {
                name,
                position,
                col_type,
                saved: values,
            },
            ChangeOp::DropColumn {
                name,
                position,
                col_type,
                saved,
            } => ChangeOp::AddColumn {
                name,
                position,
                col_type,
                values: saved,
            },
            ChangeOp::TransformColumnAffine {
                name,
                a,
                b,
                inv_a,
                inv_b,
                saved,
            } => ChangeOp::TransformColumnAffine {
                name: back(&name),
                a: inv_a,
                b: inv_b,
                inv_a: a,
                inv_b: b,
                saved: saved
                    .into_iter()
                    .map(|r| CellRestore {
                        key: r.key,
                        pre: r.post,
                        post: r.pre,
                    })
                    .collect(),
            },
            ChangeOp::DeleteRow { key, position, row } => ChangeOp::AddRow { key, position, row },
            ChangeOp::AddRow { key, position, row } => ChangeOp::DeleteRow { key, position, row },
            ChangeOp::UpdateCell { key, column, old, new } => ChangeOp::UpdateCell {
                key,
                column: back(&column),
                old: new,
                new: old,
            },
        })
        .collect();

    let mut inverted = ChangeLog {
        family_id: log.family_id.clone(),
        from_ordinal: log.to_ordinal,
        to_ordinal: log.from_ordinal,
        key: log.key.as_ref().map(|k| KeyColumns {
            from: k.to.clone(),
            to: k.from.clone(),
        }),
        ops,
    };
    inverted.canonicalize();
    inverted
}
