// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet};

use sha2::{Digest, Sha256};

use super::{CellRestore, ChangeError, ChangeLog, ChangeOp, KeyColumns};
use crate::table::{CellValue, ColType, Table};

const EXACT_INT: f64 = 9_007_199_254_740_992.0; // 2^53

fn hash_row(row: &[CellValue]) -> String {
    let mut hasher = Sha256::new();
    for cell in row {
        hasher.update(serde_json::to_vec(cell).expect("cells serialize"));
        hasher.update([0x1f]);
    }
    hex::encode(&hasher.finalize()[..12])
}

/// Row identities of `table`: key-column values when `key` names a unique,
/// non-Null column, otherwise `#<content hash>:<occurrence>` text values.
pub fn row_identities(table: &Table, key: Option<&str>) -> Result<Vec<CellValue>, ChangeError> {
    match key {
        Some(name) => {
            let idx = table.column_index(name).ok_or_else(|| ChangeError::Conflict {
                op: "row identity".into(),
                reason: format!("key column {name} missing"),
            })?;
            let mut seen = HashSet::new();
            table
                .column(idx)
                .map(|cell| {
                    if cell.is_null() || !seen.insert(cell) {
                        Err(ChangeError::Conflict {
                            op: "row identity".into(),
                            reason: format!("key column {name} is not unique and non-null"),
                        })
                    } else {
                        Ok(cell.clone())
                    }
                })
                .collect()
        }
        None => {
            let mut occurrences: HashMap<String, usize> = HashMap::new();
            Ok(table
                .rows()
                .iter()
                .map(|row| {
                    let h = hash_row(row);
                    let n = occurrences.entry(h.clone()).or_default();
                    *n += 1;
                    CellValue::Text(format!("#{h}:{n}"))
                })
                .collect())
        }
    }
}

/// `(1/a, -b/a)`.
pub fn affine_inverse(a: f64, b: f64) -> (f64, f64) {
    (1.0 / a, -b / a)
}

fn integral(v: f64) -> bool {
    v.fract() == 0.0 && v.abs() <= EXACT_INT
}

/// Image of one cell under `x -> a * x + b` in a column of type `ty`.
/// Integer columns stay integral or the map is undefined (`None`).
pub fn affine_image(x: &CellValue, ty: ColType, a: f64, b: f64) -> Option<CellValue> {
    match (x, ty) {
        (CellValue::Null, _) => Some(CellValue::Null),
        (CellValue::Integer(v), ColType::Integer) => {
            if integral(a) && integral(b) {
                let y = (a as i128) * (*v as i128) + (b as i128);
                i64::try_from(y).ok().map(CellValue::Integer)
            } else {
                let y = a * (*v as f64) + b;
                integral(y).then_some(CellValue::Integer(y as i64))
            }
        }
        (CellValue::Real(v), ColType::Real) => CellValue::real(a * v + b),
        _ => None,
    }
}

/// Cells that need their exact images saved so the transform round-trips
/// bit-for-bit. `pairs` holds `(row key, pre, post)` for every row the
/// transform must carry from input to output.
pub fn affine_restore_list(
    ty: ColType,
    a: f64,
    b: f64,
    pairs: &[(CellValue, CellValue, CellValue)],
) -> Vec<CellRestore> {
    let (ia, ib) = affine_inverse(a, b);
    pairs
        .iter()
        .filter(|(_, pre, post)| {
            affine_image(pre, ty, a, b).as_ref() != Some(post) || affine_image(post, ty, ia, ib).as_ref() != Some(pre)
        })
        .map(|(key, pre, post)| CellRestore {
            key: key.clone(),
            pre: pre.clone(),
            post: post.clone(),
        })
        .collect()
}

fn conflict(op: &ChangeOp, reason: impl Into<String>) -> ChangeError {
    ChangeError::Conflict {
        op: op.describe(),
        reason: reason.into(),
    }
}

fn stale(op: &ChangeOp, reason: impl Into<String>) -> ChangeError {
    ChangeError::Stale {
        op: op.describe(),
        reason: reason.into(),
    }
}

struct Working {
    headers: Vec<String>,
    types: Vec<ColType>,
    rows: Vec<Vec<CellValue>>,
    ids: Vec<CellValue>,
}

impl Working {
    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn row_of(&self) -> HashMap<&CellValue, usize> {
        self.ids.iter().enumerate().map(|(i, k)| (k, i)).collect()
    }
}

/// Applies `log` to `t`, returning the next version. `t` is not modified.
pub fn apply_log(t: &Table, log: &ChangeLog) -> Result<Table, ChangeError> {
    log.validate()?;
    let key_from = log.key.as_ref().map(|k: &KeyColumns| k.from.as_str());
    let ids = row_identities(t, key_from)?;
    let mut w = Working {
        headers: t.headers().to_vec(),
        types: t.col_types().to_vec(),
        rows: t.rows().to_vec(),
        ids,
    };

    // Deletions resolve against the input table.
    let mut doomed = HashSet::new();
    {
        let index = w.row_of();
        for op in &log.ops {
            if let ChangeOp::DeleteRow { key, row, .. } = op {
                let i = *index.get(key).ok_or_else(|| conflict(op, "row not present"))?;
                if &w.rows[i] != row {
                    return Err(stale(op, "saved row differs from the table"));
                }
                doomed.insert(i);
            }
        }
    }
    if !doomed.is_empty() {
        let mut i = 0;
        w.rows.retain(|_| {
            i += 1;
            !doomed.contains(&(i - 1))
        });
        let mut i = 0;
        w.ids.retain(|_| {
            i += 1;
            !doomed.contains(&(i - 1))
        });
    }

    for op in &log.ops {
        if let ChangeOp::RenameColumn { old_name, new_name } = op {
            let j = w.col(old_name).ok_or_else(|| conflict(op, "column missing"))?;
            if w.col(new_name).is_some() {
                return Err(conflict(op, "target name already exists"));
            }
            w.headers[j] = new_name.clone();
        }
    }

    for op in &log.ops {
        if let ChangeOp::DropColumn { name, .. } = op {
            let j = w.col(name).ok_or_else(|| conflict(op, "column missing"))?;
            w.headers.remove(j);
            w.types.remove(j);
            for row in &mut w.rows {
                row.remove(j);
            }
        }
    }

    let mut adds: Vec<&ChangeOp> = log
        .ops
        .iter()
        .filter(|op| matches!(op, ChangeOp::AddColumn { .. }))
        .collect();
    adds.sort_by_key(|op| match op {
        ChangeOp::AddColumn { position, .. } => *position,
        _ => unreachable!(),
    });
    for op in adds {
        let ChangeOp::AddColumn {
            name,
            position,
            col_type,
            values,
        } = op
        else {
            unreachable!()
        };
        if w.col(name).is_some() {
            return Err(conflict(op, "column already exists"));
        }
        if *position > w.headers.len() {
            return Err(conflict(op, format!("position {position} out of range")));
        }
        let mut by_key = HashMap::with_capacity(values.len());
        for (k, v) in values {
            if !col_type.admits(v) {
                return Err(conflict(op, format!("value {v:?} is not {col_type}")));
            }
            by_key.insert(k, v);
        }
        w.headers.insert(*position, name.clone());
        w.types.insert(*position, *col_type);
        for (row, id) in w.rows.iter_mut().zip(&w.ids) {
            let v = by_key.get(id).map_or(CellValue::Null, |v| (*v).clone());
            row.insert(*position, v);
        }
    }

    for op in &log.ops {
        if let ChangeOp::TransformColumnAffine { name, a, b, saved, .. } = op {
            let j = w.col(name).ok_or_else(|| conflict(op, "column missing"))?;
            let ty = w.types[j];
            if !ty.is_numeric() {
                return Err(conflict(op, format!("column is {ty}")));
            }
            let restore: HashMap<&CellValue, &CellRestore> = saved.iter().map(|r| (&r.key, r)).collect();
            for (row, id) in w.rows.iter_mut().zip(&w.ids) {
                let cell = &mut row[j];
                match restore.get(id) {
                    Some(r) => {
                        if *cell != r.pre {
                            return Err(stale(op, format!("saved pre-image of row {id} differs")));
                        }
                        if !ty.admits(&r.post) {
                            return Err(conflict(op, "saved post-image has the wrong type"));
                        }
                        *cell = r.post.clone();
                    }
                    None => {
                        *cell = affine_image(cell, ty, *a, *b)
                            .ok_or_else(|| conflict(op, format!("no representable image for row {id}")))?;
                    }
                }
            }
        }
    }

    let mut inserts: Vec<&ChangeOp> = log
        .ops
        .iter()
        .filter(|op| matches!(op, ChangeOp::AddRow { .. }))
        .collect();
    if !inserts.is_empty() {
        inserts.sort_by_key(|op| match op {
            ChangeOp::AddRow { position, .. } => *position,
            _ => unreachable!(),
        });
        let key_to = match &log.key {
            Some(k) => Some(w.col(&k.to).ok_or_else(|| conflict(inserts[0], "key column missing"))?),
            None => None,
        };
        let mut present: HashSet<CellValue> = w.ids.iter().cloned().collect();
        for op in inserts {
            let ChangeOp::AddRow { key, position, row } = op else {
                unreachable!()
            };
            if !present.insert(key.clone()) {
                return Err(conflict(op, "row key already present"));
            }
            if row.len() != w.headers.len() {
                return Err(conflict(
                    op,
                    format!("row has {} cells, table has {}", row.len(), w.headers.len()),
                ));
            }
            if let Some((j, ty)) = row
                .iter()
                .zip(&w.types)
                .enumerate()
                .find_map(|(j, (c, ty))| (!ty.admits(c)).then_some((j, *ty)))
            {
                return Err(conflict(op, format!("cell {j} is not {ty}")));
            }
            if let Some(kj) = key_to {
                if &row[kj] != key {
                    return Err(conflict(op, "key cell does not match the row key"));
                }
            }
            if *position > w.rows.len() {
                return Err(conflict(op, format!("position {position} out of range")));
            }
            w.rows.insert(*position, row.clone());
            w.ids.insert(*position, key.clone());
        }
    }

    let updates: Vec<&ChangeOp> = log
        .ops
        .iter()
        .filter(|op| matches!(op, ChangeOp::UpdateCell { .. }))
        .collect();
    if !updates.is_empty() {
        let index: HashMap<CellValue, usize> = w.row_of().into_iter().map(|(k, i)| (k.clone(), i)).collect();
        for op in updates {
            let ChangeOp::UpdateCell { key, column, old, new } = op else {
                unreachable!()
            };
            let i = *index.get(key).ok_or_else(|| conflict(op, "row not present"))?;
            let j = w.col(column).ok_or_else(|| conflict(op, "column missing"))?;
            if &w.rows[i][j] != old {
                return Err(stale(op, format!("expected {old:?}, found {:?}", w.rows[i][j])));
            }
            if !w.types[j].admits(new) {
                return Err(conflict(op, format!("new value is not {}", w.types[j])));
            }
            w.rows[i][j] = new.clone();
        }
    }

    if let Some(k) = &log.key {
        if w.col(&k.to).is_none() {
            return Err(ChangeError::Conflict {
                op: "key".into(),
                reason: format!("key column {} missing after apply", k.to),
            });
        }
    }

    Ok(Table::from_parts_unchecked(
        t.table_id.clone(),
        w.headers,
        w.types,
        w.rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::change::invert_log;

    fn t(src: &str) -> Table {
        Table::from_csv("t", src.as_bytes()).unwrap()
    }

    fn text(s: &str) -> CellValue {
        CellValue::Text(s.into())
    }

    fn key(from: &str, to: &str) -> Option<KeyColumns> {
        Some(KeyColumns {
            from: from.into(),
            to: to.into(),
        })
    }

    #[test]
    fn empty_log_is_identity() {
        let src = t("a,b\n1,x\n2,y\n");
        let out = apply_log(&src, &ChangeLog::new("f", 0, None, vec![])).unwrap();
        assert!(out.content_eq(&src));
    }

    #[test]
    fn mixed_log_round_trips() {
        let src = t("player,team,age,pts\nL. James,LAL,35,27.3\nK. Durant,BKN,31,26.0\nS. Curry,GSW,32,30.1\n");
        let log = ChangeLog::new(
            "nba",
            0,
            key("player", "player"),
            vec![
                ChangeOp::RenameColumn {
                    old_name: "pts".into(),
                    new_name: "points".into(),
                },
                ChangeOp::AddColumn {
                    name: "position".into(),
                    position: 1,
                    col_type: ColType::Text,
                    values: vec![(text("L. James"), text("F")), (text("S. Curry"), text("G"))],
                },
                ChangeOp::DropColumn {
                    name: "team".into(),
                    position: 1,
                    col_type: ColType::Text,
                    saved: vec![
                        (text("L. James"), text("LAL")),
                        (text("K. Durant"), text("BKN")),
                        (text("S. Curry"), text("GSW")),
                    ],
                },
                ChangeOp::affine("age", 1.0, 5.0, vec![]),
                ChangeOp::DeleteRow {
                    key: text("K. Durant"),
                    position: 1,
                    row: src.rows()[1].clone(),
                },
                ChangeOp::AddRow {
                    key: text("J. Harden"),
                    position: 0,
                    row: vec![
                        text("J. Harden"),
                        text("G"),
                        CellValue::Integer(36),
                        CellValue::Real(36.1),
                    ],
                },
                ChangeOp::UpdateCell {
                    key: text("L. James"),
                    column: "points".into(),
                    old: CellValue::Real(27.3),
                    new: CellValue::Real(25.7),
                },
            ],
        );
        let out = apply_log(&src, &log).unwrap();
        let expected = t("player,position,age,points\nJ. Harden,G,36,36.1\nL. James,F,40,25.7\nS. Curry,G,37,30.1\n");
        assert!(out.content_eq(&expected), "{}", out.to_csv());
        let back = apply_log(&out, &invert_log(&log)).unwrap();
        assert!(back.content_eq(&src), "{}", back.to_csv());
        assert_eq!(src.to_csv(), t(&src.to_csv()).to_csv());
    }

    #[test]
    fn conflicts_and_stale_checks() {
        let src = t("id,v\na,1\nb,2\n");
        let missing = ChangeLog::new(
            "f",
            0,
            key("id", "id"),
            vec![ChangeOp::DropColumn {
                name: "nope".into(),
                position: 0,
                col_type: ColType::Integer,
                saved: vec![],
            }],
        );
        assert!(matches!(apply_log(&src, &missing), Err(ChangeError::Conflict { .. })));
        let dup = ChangeLog::new(
            "f",
            0,
            key("id", "id"),
            vec![ChangeOp::AddRow {
                key: text("a"),
                position: 0,
                row: vec![text("a"), CellValue::Integer(3)],
            }],
        );
        assert!(matches!(apply_log(&src, &dup), Err(ChangeError::Conflict { .. })));
        let stale_upd = ChangeLog::new(
            "f",
            0,
            key("id", "id"),
            vec![ChangeOp::UpdateCell {
                key: text("a"),
                column: "v".into(),
                old: CellValue::Real(1.0),
                new: CellValue::Integer(5),
            }],
        );
        assert!(matches!(apply_log(&src, &stale_upd), Err(ChangeError::Stale { .. })));
    }

    #[test]
    fn keyless_rows_use_content_hash() {
        let src = t("a,b\n1,x\n1,x\n2,y\n");
        let ids = row_identities(&src, None).unwrap();
        assert_ne!(ids[0], ids[1]);
        let log = ChangeLog::new(
            "f",
            0,
            None,
            vec![ChangeOp::DeleteRow {
                key: ids[1].clone(),
                position: 1,
                row: src.rows()[1].clone(),
            }],
        );
        let out = apply_log(&src, &log).unwrap();
        assert!(out.content_eq(&t("a,b\n1,x\n2,y\n")));
    }

    #[test]
    fn affine_restore_covers_rounding() {
        let pairs: Vec<_> = (0..50)
            .map(|i| {
                let x = CellValue::Real(i as f64 * 0.1 + 0.3);
                let y = affine_image(&x, ColType::Real, 3.0, 0.7).unwrap();
                (CellValue::Integer(i), x, y)
            })
            .collect();
        let saved = affine_restore_list(ColType::Real, 3.0, 0.7, &pairs);
        let mut src = String::from("k,v\n");
        for (k, x, _) in &pairs {
            src.push_str(&format!("{},{}\n", k, x));
        }
        let src = t(&src);
        let log = ChangeLog::new("f", 0, key("k", "k"), vec![ChangeOp::affine("v", 3.0, 0.7, saved)]);
        let out = apply_log(&src, &log).unwrap();
        for (row, (_, _, y)) in out.rows().iter().zip(&pairs) {
            assert_eq!(&row[1], y);
        }
        assert!(apply_log(&out, &invert_log(&log)).unwrap().content_eq(&src));
    }

    #[test]
    fn input_is_untouched() {
        let src = t("id,v\na,1\nb,2\n");
        let before = src.to_csv();
        let log = ChangeLog::new("f", 0, key("id", "id"), vec![ChangeOp::affine("v", 2.0, 0.0, vec![])]);
        apply_log(&src, &log).unwrap();
        assert_eq!(src.to_csv(), before);
    }
}
