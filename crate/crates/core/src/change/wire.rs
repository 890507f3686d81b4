// SPDX-License-Identifier: Apache-2.0

//! Line-oriented change-log file format (UTF-8, one JSON value per line).
//!
//! Line 1 is the header object with fields in this order:
//! `family_id`, `from_ordinal`, `to_ordinal`, `op_count`, `key`
//! (`null` or `{"from": .., "to": ..}`).
//!
//! Each following line is one op, `{"<Variant>": {fields..}}`, with fields in
//! declaration order:
//!
//! | variant                 | fields                                      |
//! |-------------------------|---------------------------------------------|
//! | `RenameColumn`          | `old_name`, `new_name`                      |
//! | `AddColumn`             | `name`, `position`, `col_type`, `values`    |
//! | `DropColumn`            | `name`, `position`, `col_type`, `saved`     |
//! | `TransformColumnAffine` | `name`, `a`, `b`, `inv_a`, `inv_b`, `saved` |
//! | `DeleteRow`             | `key`, `position`, `row`                    |
//! | `AddRow`                | `key`, `position`, `row`                    |
//! | `UpdateCell`            | `key`, `column`, `old`, `new`               |
//!
//! Cells encode as `null`, a bare integer, a float with a decimal point or
//! exponent (`2.0`, `1e-7`), a bare string, or `{"ts": secs}`.

use serde::{Deserialize, Serialize};

use super::{ChangeError, ChangeLog, ChangeOp, KeyColumns};
use crate::table::CellValue;

#[derive(Serialize, Deserialize)]
struct Header {
    family_id: String,
    from_ordinal: u32,
    to_ordinal: u32,
    op_count: usize,
    key: Option<KeyColumns>,
}

pub fn write_log(log: &ChangeLog) -> String {
    let header = Header {
        family_id: log.family_id.clone(),
        from_ordinal: log.from_ordinal,
        to_ordinal: log.to_ordinal,
        op_count: log.ops.len(),
        key: log.key.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for op in &log.ops {
        out.push_str(&serde_json::to_string(op).expect("ops serialize"));
        out.push('\n');
    }
    out
}

fn check_cells<'a>(cells: impl IntoIterator<Item = &'a CellValue>) -> Result<(), String> {
    for c in cells {
        if let CellValue::Real(v) = c {
            if !v.is_finite() {
                return Err("non-finite real".into());
            }
        }
    }
    Ok(())
}

fn op_cells(op: &ChangeOp) -> Vec<&CellValue> {
    match op {
        ChangeOp::RenameColumn { .. } => vec![],
        ChangeOp::AddColumn { values, .. } => values.iter().flat_map(|(k, v)| [k, v]).collect(),
        ChangeOp::DropColumn { saved, .. } => saved.iter().flat_map(|(k, v)| [k, v]).collect(),
        ChangeOp::TransformColumnAffine { saved, .. } => saved.iter().flat_map(|r| [&r.key, &r.pre, &r.post]).collect(),
        ChangeOp::DeleteRow { key, row, .. } | ChangeOp::AddRow { key, row, .. } => {
            std::iter::once(key).chain(row.iter()).collect()
        }
        ChangeOp::UpdateCell { key, old, new, .. } => vec![key, old, new],
    }
}

/// Parses one log. Ops are re-sorted into canonical order and the log's
/// structural invariants are checked.
pub fn parse_log(text: &str) -> Result<ChangeLog, ChangeError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(ChangeError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header: Header = serde_json::from_str(first).map_err(|e| ChangeError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let mut ops = Vec::new();
    for (i, line) in lines {
        let op: ChangeOp = serde_json::from_str(line).map_err(|e| ChangeError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        check_cells(op_cells(&op)).map_err(|message| ChangeError::Parse { line: i + 1, message })?;
        ops.push(op);
    }
    if ops.len() != header.op_count {
        return Err(ChangeError::Parse {
            line: 1,
            message: format!("header declares {} ops, found {}", header.op_count, ops.len()),
        });
    }
    let mut log = ChangeLog {
        family_id: header.family_id,
        from_ordinal: header.from_ordinal,
        to_ordinal: header.to_ordinal,
        key: header.key,
        ops,
    };
    log.canonicalize();
    log.validate()?;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::change::CellRestore;
    use crate::table::ColType;

    #[test]
    fn wire_round_trip() {
        let log = ChangeLog::new(
            "fam",
            2,
            Some(KeyColumns {
                from: "player".into(),
                to: "name".into(),
            }),
            vec![
                ChangeOp::RenameColumn {
                    old_name: "player".into(),
                    new_name: "name".into(),
                },
                ChangeOp::affine(
                    "pts",
                    0.1,
                    1e-7,
                    vec![CellRestore {
                        key: CellValue::Text("x".into()),
                        pre: CellValue::Real(0.30000000000000004),
                        post: CellValue::Real(1.0000001),
                    }],
                ),
                ChangeOp::AddColumn {
                    name: "when".into(),
                    position: 1,
                    col_type: ColType::Timestamp,
                    values: vec![(CellValue::Text("x".into()), CellValue::Timestamp(-86_400))],
                },
            ],
        );
        let text = write_log(&log);
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("{\"family_id\":\"fam\",\"from_ordinal\":2,\"to_ordinal\":3,\"op_count\":3,"));
        assert_eq!(parse_log(&text).unwrap(), log);
    }

    #[test]
    fn rejects_count_mismatch_and_garbage() {
        let text = "{\"family_id\":\"f\",\"from_ordinal\":0,\"to_ordinal\":1,\"op_count\":1,\"key\":null}\n";
        assert!(matches!(parse_log(text), Err(ChangeError::Parse { line: 1, .. })));
        let text = format!("{}{{\"Nope\":{{}}}}\n", text);
        assert!(matches!(parse_log(&text), Err(ChangeError::Parse { line: 2, .. })));
        assert!(parse_log("").is_err());
    }
}
